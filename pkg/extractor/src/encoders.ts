import { existsSync } from 'node:fs'
import { readFileSync } from 'node:fs'
import { join } from 'node:path'

export class EncoderLoadError extends Error {}
export class MissingImageError extends Error {}

export interface EncodeInput {
  sampleId: string
  question: string
  /** Resolved image path, when an images directory was supplied. */
  imagePath?: string
}

export interface Encoder {
  readonly name: string
  readonly dim: number
  readonly requiresImages: boolean
  encode(input: EncodeInput): number[]
}

/** FNV-1a over UTF-8 bytes; stable across platforms and runs. */
function fnv1a(text: string): number {
  let h = 0x811c9dc5
  const bytes = Buffer.from(text, 'utf8')
  for (const b of bytes) {
    h ^= b
    h = Math.imul(h, 0x01000193) >>> 0
  }
  return h >>> 0
}

function tokenize(text: string): string[] {
  return text
    .toLowerCase()
    .split(/[^a-z0-9]+/)
    .filter((t) => t.length > 0)
}

/**
 * Signed feature hashing over word unigrams and bigrams. Raw counts are
 * emitted as-is: the consuming engine's input projection owns the scale,
 * so the encoder must not normalize.
 */
export class HashTextEncoder implements Encoder {
  readonly name: string
  readonly dim: number
  readonly requiresImages: boolean = false

  constructor(dim = 256, name = 'hash-text') {
    if (!Number.isInteger(dim) || dim < 1) {
      throw new EncoderLoadError(`encoder dimension must be a positive integer, got ${dim}`)
    }
    this.dim = dim
    this.name = name
  }

  protected grams(input: EncodeInput): string[] {
    const tokens = tokenize(input.question)
    const grams = [...tokens]
    for (let i = 0; i + 1 < tokens.length; i++) {
      grams.push(`${tokens[i]} ${tokens[i + 1]}`)
    }
    return grams
  }

  encode(input: EncodeInput): number[] {
    const out = new Array<number>(this.dim).fill(0)
    for (const gram of this.grams(input)) {
      const h = fnv1a(gram)
      const sign = h & 1 ? 1 : -1
      out[(h >>> 1) % this.dim] += sign
    }
    return out
  }
}

/**
 * Text+image variant: hashes the raw image bytes alongside the question
 * grams. No decoding is attempted; identical files hash identically.
 */
export class HashMultimodalEncoder extends HashTextEncoder {
  override readonly requiresImages = true

  constructor(dim = 256) {
    super(dim, 'hash-multimodal')
  }

  override encode(input: EncodeInput): number[] {
    if (!input.imagePath) {
      throw new MissingImageError(
        `encoder ${this.name} needs an image for sample ${input.sampleId}; pass --images DIR`,
      )
    }
    let bytes: Buffer
    try {
      bytes = readFileSync(input.imagePath)
    } catch {
      throw new MissingImageError(`sample ${input.sampleId}: cannot read image ${input.imagePath}`)
    }
    const out = super.encode(input)
    // chunked byte 4-grams keep the image contribution sparse but stable
    for (let i = 0; i + 4 <= bytes.length; i += 4) {
      const h = fnv1a(`px:${bytes.readUInt32LE(i)}`)
      const sign = h & 1 ? 1 : -1
      out[(h >>> 1) % this.dim] += sign
    }
    return out
  }
}

/** Pretrained encoders need their weights on disk; nothing is downloaded. */
const PRETRAINED = ['blip-vqa-base', 'blip-base-vqa', 'clip-vit-base'] as const

function weightsDir(name: string): string {
  const root = process.env.ENCODER_WEIGHTS_DIR ?? 'models'
  return join(root, name)
}

export function makeEncoder(name: string, dim = 256): Encoder {
  if (name === 'hash-text') return new HashTextEncoder(dim)
  if (name === 'hash-multimodal') return new HashMultimodalEncoder(dim)
  if ((PRETRAINED as readonly string[]).includes(name)) {
    const dir = weightsDir(name)
    if (!existsSync(dir)) {
      throw new EncoderLoadError(
        `encoder ${name} requires local weights at ${dir} ` +
          `(set ENCODER_WEIGHTS_DIR); offline fallback: --encoder hash-text`,
      )
    }
    throw new EncoderLoadError(
      `encoder ${name}: weights found at ${dir} but no runtime backend is bundled; ` +
        `use hash-text or hash-multimodal`,
    )
  }
  throw new EncoderLoadError(
    `unknown encoder ${name}; available: hash-text, hash-multimodal, ${PRETRAINED.join(', ')}`,
  )
}
