import type { ProgramView } from '../src/types';

/** Four-block program: one composite wrapping two leaves, plus two free leaves. */
export function fourBlockProgram(): ProgramView {
  return {
    id: 'prog0',
    source: [
      'union() {',                         // 1
      '    // body',                       // 2
      '    cube([8, 1, 1], center=true);', // 3
      '    union() {',                     // 4
      '        // wings',                  // 5
      '        cube([1, 6, 0.3]);',        // 6
      '        // tail',                   // 7
      '        cube([0.5, 2, 0.3]);',      // 8
      '    }',                             // 9
      '}',                                 // 10
    ].join('\n'),
    category: 'airplane',
    label_set: ['body', 'wings', 'tail', 'engine'],
    blocks: [
      { id: 0, kind: 'irreducible', span: [3, 3], parent: null, children: [], labels: ['body'] },
      { id: 1, kind: 'irreducible', span: [6, 6], parent: 3, children: [], labels: ['wings'] },
      { id: 2, kind: 'irreducible', span: [8, 8], parent: 3, children: [], labels: ['tail'] },
      { id: 3, kind: 'composite', span: [4, 9], parent: null, children: [1, 2], labels: [] },
    ],
    renders: [
      {
        view: 0,
        depth_url: '/api/programs/prog0/renders/depth_0.png',
        masks: {
          '0': '/api/programs/prog0/renders/mask_0_0.png',
          '1': '/api/programs/prog0/renders/mask_0_1.png',
          '2': '/api/programs/prog0/renders/mask_0_2.png',
          '3': '/api/programs/prog0/renders/mask_0_3.png',
        },
      },
    ],
    revision: 'rev-1',
  };
}
