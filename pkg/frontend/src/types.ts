// Mirrors of the review-service API payloads.

export interface BlockView {
  id: number;
  kind: 'irreducible' | 'composite';
  span: [number, number];
  parent: number | null;
  children: number[];
  labels: string[];
}

export interface RenderView {
  view: number;
  depth_url: string;
  masks: Record<string, string>; // block id -> overlay PNG url
}

export interface ProgramView {
  id: string;
  source: string;
  category: string;
  label_set: string[];
  blocks: BlockView[];
  renders: RenderView[];
  revision: string;
}

export interface ProgramListEntry {
  id: string;
  track: string;
  category: string;
  blocks: number;
  labeled_blocks: number;
  status: string;
}

export const UNLABELED = 'unlabeled';
