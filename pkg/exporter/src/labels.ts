/**
 * Label-set hygiene for retrieval evaluation.
 *
 * Some classification label sets reuse a name for different classes
 * ("crane" the bird and "crane" the machine), which makes text-query
 * retrieval and its evaluation ambiguous. Exports that carry labels drop
 * every class whose name is not unique; on the standard 1000-class set,
 * two names collide twice each, leaving 996 usable classes.
 */

export interface LabeledClass {
  classId: number;
  label: string;
}

export interface LabelFilterResult {
  kept: LabeledClass[];
  droppedLabels: string[];
}

export function dropAmbiguousLabels(classes: readonly LabeledClass[]): LabelFilterResult {
  const counts = new Map<string, number>();
  for (const c of classes) counts.set(c.label, (counts.get(c.label) ?? 0) + 1);
  const dropped = [...counts.entries()]
    .filter(([, n]) => n > 1)
    .map(([label]) => label)
    .sort();
  return {
    kept: classes.filter((c) => counts.get(c.label) === 1),
    droppedLabels: dropped,
  };
}
