import { existsSync, readFileSync, writeFileSync } from 'node:fs'
import { join } from 'node:path'

import { Encoder } from './encoders.js'

export class QuestionFileError extends Error {}

export interface Question {
  sampleId: string
  question: string
}

function questionText(sampleId: string, entry: unknown): string {
  if (typeof entry === 'string') return entry
  if (entry && typeof entry === 'object') {
    const rec = entry as Record<string, unknown>
    for (const key of ['question', 'text']) {
      if (typeof rec[key] === 'string') return rec[key] as string
    }
  }
  throw new QuestionFileError(`sample ${sampleId}: no question text found`)
}

/**
 * Accepts either one JSON object keyed by sample id, a JSON array of
 * {sample_id, question} records, or JSONL of such records. Order of the
 * file is preserved.
 */
export function readQuestions(path: string): Question[] {
  const raw = readFileSync(path, 'utf8')
  let parsed: unknown
  try {
    parsed = JSON.parse(raw)
  } catch {
    return raw
      .split('\n')
      .map((line, i) => ({ line: line.trim(), lineNo: i + 1 }))
      .filter(({ line }) => line.length > 0)
      .map(({ line, lineNo }) => {
        let rec: unknown
        try {
          rec = JSON.parse(line)
        } catch (err) {
          throw new QuestionFileError(`${path}:${lineNo}: invalid JSON`)
        }
        const obj = rec as Record<string, unknown>
        if (!obj || typeof obj !== 'object' || typeof obj.sample_id !== 'string') {
          throw new QuestionFileError(`${path}:${lineNo}: expected {sample_id, question}`)
        }
        return { sampleId: obj.sample_id, question: questionText(obj.sample_id, obj) }
      })
  }
  if (Array.isArray(parsed)) {
    return parsed.map((entry, i) => {
      const rec = entry as Record<string, unknown>
      if (!rec || typeof rec !== 'object' || typeof rec.sample_id !== 'string') {
        throw new QuestionFileError(`${path}: record ${i} lacks a sample_id`)
      }
      return { sampleId: rec.sample_id, question: questionText(rec.sample_id, rec) }
    })
  }
  if (parsed && typeof parsed === 'object') {
    return Object.entries(parsed as Record<string, unknown>).map(([sampleId, entry]) => ({
      sampleId,
      question: questionText(sampleId, entry),
    }))
  }
  throw new QuestionFileError(`${path}: expected an object, array, or JSONL of questions`)
}

export interface ExtractOptions {
  imagesDir?: string
  /** Candidate image extensions tried in order when resolving sample images. */
  imageExtensions?: string[]
  log?: (line: string) => void
}

export interface ExtractResult {
  records: number
  dim: number
  encoder: string
}

/**
 * Encode every question and write the engine's ingestion format: one JSON
 * object per line with `sample_id` and a constant-dimension `embedding`.
 */
export function extract(
  questionsPath: string,
  encoder: Encoder,
  outPath: string,
  options: ExtractOptions = {},
): ExtractResult {
  const questions = readQuestions(questionsPath)
  const log = options.log ?? ((line: string) => console.error(line))
  const extensions = options.imageExtensions ?? ['.jpg', '.jpeg', '.png']

  const seen = new Set<string>()
  const lines: string[] = []
  for (const { sampleId, question } of questions) {
    if (seen.has(sampleId)) {
      throw new QuestionFileError(`duplicate sample_id ${sampleId} in ${questionsPath}`)
    }
    seen.add(sampleId)
    let imagePath: string | undefined
    if (options.imagesDir) {
      for (const ext of extensions) {
        const candidate = join(options.imagesDir, sampleId + ext)
        if (existsSync(candidate)) {
          imagePath = candidate
          break
        }
      }
      // leave a best-guess path so the encoder can name what is missing
      imagePath ??= join(options.imagesDir, sampleId + extensions[0])
    }
    const embedding = encoder.encode({ sampleId, question, imagePath })
    lines.push(JSON.stringify({ sample_id: sampleId, embedding }))
  }
  writeFileSync(outPath, lines.join('\n') + '\n')
  log(`encoder=${encoder.name} dim=${encoder.dim} records=${questions.length} out=${outPath}`)
  return { records: questions.length, dim: encoder.dim, encoder: encoder.name }
}
