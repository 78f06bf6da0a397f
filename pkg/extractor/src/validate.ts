import { readFileSync } from 'node:fs'

export interface ValidationReport {
  ok: boolean
  records: number
  dim: number | null
  errors: string[]
}

/**
 * Re-parse an emitted feature file against the ingestion schema: one JSON
 * object per line, string `sample_id`, finite numeric `embedding` of one
 * shared dimension, no duplicate ids. Every violation is reported with its
 * line number; validation keeps going after an error.
 */
export function validate(path: string): ValidationReport {
  const errors: string[] = []
  let dim: number | null = null
  let records = 0
  const seen = new Set<string>()

  const lines = readFileSync(path, 'utf8').split('\n')
  lines.forEach((line, i) => {
    const lineNo = i + 1
    if (line.trim().length === 0) return
    let rec: unknown
    try {
      rec = JSON.parse(line)
    } catch {
      errors.push(`line ${lineNo}: invalid JSON`)
      return
    }
    if (!rec || typeof rec !== 'object' || Array.isArray(rec)) {
      errors.push(`line ${lineNo}: expected an object`)
      return
    }
    const obj = rec as Record<string, unknown>
    if (typeof obj.sample_id !== 'string') {
      errors.push(`line ${lineNo}: sample_id must be a string`)
      return
    }
    const emb = obj.embedding
    if (!Array.isArray(emb) || emb.length === 0) {
      errors.push(`line ${lineNo}: embedding must be a non-empty array`)
      return
    }
    if (!emb.every((x) => typeof x === 'number' && Number.isFinite(x))) {
      errors.push(`line ${lineNo}: embedding has non-numeric or non-finite entries`)
      return
    }
    if (dim === null) {
      dim = emb.length
    } else if (emb.length !== dim) {
      errors.push(`line ${lineNo}: dimension ${emb.length} != ${dim}`)
      return
    }
    if (seen.has(obj.sample_id)) {
      errors.push(`line ${lineNo}: duplicate sample_id ${obj.sample_id}`)
      return
    }
    seen.add(obj.sample_id)
    records += 1
  })

  if (records === 0 && errors.length === 0) {
    errors.push('no feature records')
  }
  return { ok: errors.length === 0, records, dim, errors }
}
