#!/usr/bin/env node
import { resolve } from 'node:path'
import { fileURLToPath } from 'node:url'
import { parseArgs } from 'node:util'

import { EncoderLoadError, MissingImageError, makeEncoder } from './encoders.js'
import { QuestionFileError, extract } from './extract.js'
import { validate } from './validate.js'

const USAGE = `usage:
  dagsel-extract extract --questions FILE --encoder NAME --out FILE [--images DIR] [--dim N]
  dagsel-extract validate FILE

encoders: hash-text (offline), hash-multimodal (offline, needs --images),
blip-vqa-base (default; requires local weights)`

export function main(argv: string[]): number {
  const [command, ...rest] = argv
  if (command === 'extract') {
    let values
    try {
      values = parseArgs({
        args: rest,
        options: {
          questions: { type: 'string' },
          encoder: { type: 'string', default: 'blip-vqa-base' },
          out: { type: 'string' },
          images: { type: 'string' },
          dim: { type: 'string', default: '256' },
        },
      }).values
    } catch (err) {
      console.error(`${(err as Error).message}\n${USAGE}`)
      return 2
    }
    if (!values.questions || !values.out) {
      console.error(`extract needs --questions and --out\n${USAGE}`)
      return 2
    }
    const dim = Number(values.dim)
    try {
      const encoder = makeEncoder(values.encoder!, dim)
      extract(values.questions, encoder, values.out, { imagesDir: values.images })
      return 0
    } catch (err) {
      if (
        err instanceof EncoderLoadError ||
        err instanceof MissingImageError ||
        err instanceof QuestionFileError
      ) {
        console.error(`error: ${err.message}`)
        return 1
      }
      console.error(`error: ${(err as Error).message}`)
      return 1
    }
  }
  if (command === 'validate') {
    if (rest.length !== 1) {
      console.error(`validate takes exactly one file\n${USAGE}`)
      return 2
    }
    let report
    try {
      report = validate(rest[0])
    } catch (err) {
      console.error(`error: ${(err as Error).message}`)
      return 1
    }
    if (report.ok) {
      console.log(`ok: ${report.records} records, dim ${report.dim}`)
      return 0
    }
    for (const message of report.errors) {
      console.error(message)
    }
    return 1
  }
  console.error(USAGE)
  return 2
}

const invokedDirectly =
  process.argv[1] !== undefined && fileURLToPath(import.meta.url) === resolve(process.argv[1])
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)))
}
