// Block picking: from code lines (innermost span) and from mask pixels.

import type { BlockView, ProgramView } from './types.js';

export interface Highlight {
  blockId: number;
  start: number; // 1-based source lines, inclusive
  end: number;
  depth: number; // nesting depth, for indent-aware styling
}

/** One highlight region per block, leaves drawn over their ancestors. */
export function computeHighlights(program: ProgramView): Highlight[] {
  const depth = (b: BlockView): number => {
    let d = 0;
    let cur: BlockView | undefined = b;
    while (cur && cur.parent !== null) {
      cur = program.blocks.find((x) => x.id === cur!.parent);
      d += 1;
    }
    return d;
  };
  return program.blocks.map((b) => ({
    blockId: b.id,
    start: b.span[0],
    end: b.span[1],
    depth: depth(b),
  }));
}

/** Innermost block whose span contains the 1-based line, or null. */
export function innermostBlockAtLine(program: ProgramView, line: number): number | null {
  let best: BlockView | null = null;
  for (const block of program.blocks) {
    const [start, end] = block.span;
    if (line < start || line > end) {
      continue;
    }
    if (
      best === null ||
      end - start < best.span[1] - best.span[0] ||
      (end - start === best.span[1] - best.span[0] && block.kind === 'irreducible')
    ) {
      best = block;
    }
  }
  return best ? best.id : null;
}

/** Bit lookup for one decoded mask overlay (row-major, 1 byte per pixel). */
export interface MaskBitmap {
  width: number;
  height: number;
  bits: Uint8Array;
}

export function maskBit(mask: MaskBitmap, x: number, y: number): boolean {
  if (x < 0 || y < 0 || x >= mask.width || y >= mask.height) {
    return false;
  }
  return mask.bits[y * mask.width + x] !== 0;
}

/**
 * Block owning a clicked mask pixel.  Irreducible masks are disjoint and here
 * take precedence over composite masks (the innermost-first rule); returns
 * null on background.
 */
export function blockAtMaskPixel(
  program: ProgramView,
  masks: ReadonlyMap<number, MaskBitmap>,
  x: number,
  y: number,
): number | null {
  const ordered = [...program.blocks].sort((a, b) => {
    if (a.kind !== b.kind) {
      return a.kind === 'irreducible' ? -1 : 1;
    }
    return a.id - b.id;
  });
  for (const block of ordered) {
    const mask = masks.get(block.id);
    if (mask && maskBit(mask, x, y)) {
      return block.id;
    }
  }
  return null;
}
