//! Event normalization: intra-batch merging and cross-batch alignment.
//!
//! Pairwise event similarity is the same weighted combination used by the
//! MKB event index — trigger cosine, role-binding overlap, time
//! compatibility. Instances with provably disjoint times never merge, and
//! a pair binding the same role to different entities vetoes the merge and
//! is surfaced as a conflict.

use crate::adapters::{AdapterError, Embedder};
use crate::config::EventMatchWeights;
use crate::extract::EventInstance;
use crate::mkb::Mkb;
use crate::time;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A vetoed merge: two instances disagreed on a role filler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeConflict {
    pub first: String,
    pub second: String,
    pub role: String,
}

/// Output of intra-batch event normalization.
#[derive(Debug, Clone, Default)]
pub struct IntraEventOutcome {
    pub events: Vec<EventInstance>,
    pub conflicts: Vec<MergeConflict>,
}

fn conflicting_role(a: &EventInstance, b: &EventInstance) -> Option<String> {
    for (role, filler) in &a.bindings {
        if let Some(other) = b.bindings.get(role) {
            if other != filler {
                return Some(role.clone());
            }
        }
    }
    None
}

/// Weighted pair similarity; `None` when the time gate excludes the pair.
fn pair_similarity(
    a: &EventInstance,
    b: &EventInstance,
    trigger_cosine: f32,
    weights: &EventMatchWeights,
) -> Option<f32> {
    let compat = time::compatibility(a.time.as_ref(), b.time.as_ref());
    if compat.is_disjoint() {
        return None;
    }
    let (w_trigger, w_args, w_time) = weights.normalized();
    let pairs_a: std::collections::BTreeSet<(String, String)> = a
        .bindings
        .iter()
        .map(|(r, e)| (r.clone(), e.as_str().to_string()))
        .collect();
    let pairs_b: std::collections::BTreeSet<(String, String)> = b
        .bindings
        .iter()
        .map(|(r, e)| (r.clone(), e.as_str().to_string()))
        .collect();
    let overlap = if pairs_a.is_empty() && pairs_b.is_empty() {
        1.0
    } else {
        pairs_a.intersection(&pairs_b).count() as f32 / pairs_a.union(&pairs_b).count() as f32
    };
    Some(w_trigger * trigger_cosine + w_args * overlap + w_time * compat.score())
}

/// Merge coreferent event instances within the batch.
pub fn normalize_events_intra(
    instances: Vec<EventInstance>,
    embedder: &dyn Embedder,
    weights: &EventMatchWeights,
    align_threshold: f32,
) -> Result<IntraEventOutcome, AdapterError> {
    if instances.is_empty() {
        return Ok(IntraEventOutcome::default());
    }
    let lemmas: Vec<String> = instances.iter().map(|e| e.trigger_lemma.clone()).collect();
    let embeddings = embedder.embed(&lemmas)?;

    let mut parent: Vec<usize> = (0..instances.len()).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }

    let mut conflicts = Vec::new();
    for i in 0..instances.len() {
        for j in (i + 1)..instances.len() {
            let trigger_cos = embeddings[i].cosine(&embeddings[j]);
            match pair_similarity(&instances[i], &instances[j], trigger_cos, weights) {
                Some(score) if score >= align_threshold => {
                    if let Some(role) = conflicting_role(&instances[i], &instances[j]) {
                        conflicts.push(MergeConflict {
                            first: instances[i].fingerprint(),
                            second: instances[j].fingerprint(),
                            role,
                        });
                    } else {
                        let (ra, rb) = (find(&mut parent, i), find(&mut parent, j));
                        if ra != rb {
                            let (lo, hi) = (ra.min(rb), ra.max(rb));
                            parent[hi] = lo;
                        }
                    }
                }
                _ => {}
            }
        }
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..instances.len() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }

    let mut merged: Vec<EventInstance> = groups
        .into_values()
        .map(|idxs| merge_group(&instances, &idxs, &mut conflicts))
        .collect();
    merged.sort_by_key(|e| e.fingerprint());
    Ok(IntraEventOutcome { events: merged, conflicts })
}

/// Fold a component into one canonical instance: union of bindings,
/// narrowed time window, pooled evidence. A late transitive conflict keeps
/// the first filler and is surfaced.
fn merge_group(
    instances: &[EventInstance],
    idxs: &[usize],
    conflicts: &mut Vec<MergeConflict>,
) -> EventInstance {
    let mut members: Vec<&EventInstance> = idxs.iter().map(|&i| &instances[i]).collect();
    members.sort_by_key(|e| e.fingerprint());

    let mut canonical = members[0].clone();
    for other in &members[1..] {
        for (role, filler) in &other.bindings {
            match canonical.bindings.get(role) {
                None => {
                    canonical.bindings.insert(role.clone(), filler.clone());
                }
                Some(existing) if existing != filler => conflicts.push(MergeConflict {
                    first: canonical.fingerprint(),
                    second: other.fingerprint(),
                    role: role.clone(),
                }),
                Some(_) => {}
            }
        }
        canonical.time = match (canonical.time.take(), other.time.clone()) {
            (Some(a), Some(b)) => time::intersect(&a, &b).or(Some(a)),
            (Some(a), None) => Some(a),
            (None, b) => b,
        };
        for ev in &other.evidence {
            if !canonical.evidence.contains(ev) {
                canonical.evidence.push(ev.clone());
            }
        }
        canonical.confidence = canonical.confidence.max(other.confidence);
    }
    canonical
}

/// Align events against the MKB index. An event reuses a historical event
/// id only when the best match scores at or above the threshold, passed the
/// time gate, and binds no role contradictorily; otherwise it stays new.
pub fn align_events_cross(
    mut instances: Vec<EventInstance>,
    mkb: &Mkb,
    embedder: &dyn Embedder,
    weights: &EventMatchWeights,
    align_threshold: f32,
) -> Result<Vec<EventInstance>, AdapterError> {
    for instance in &mut instances {
        let trigger = embedder.embed_one(&instance.trigger_lemma)?;
        let key_args = instance.key_args();
        let hits = mkb.match_event(&trigger, &key_args, instance.time.as_ref(), weights);
        let aligned = hits.iter().find(|hit| {
            if hit.score < align_threshold {
                return false;
            }
            let indexed = mkb
                .indexed_events()
                .find(|e| e.event_id == hit.event_id)
                .expect("hit comes from the index");
            instance.bindings.iter().all(|(role, filler)| {
                indexed.roles.get(role).is_none_or(|existing| existing == filler)
            })
        });
        instance.aligned_to = aligned.map(|hit| hit.event_id.clone());
    }
    Ok(instances)
}

/// Intra-then-cross composition for events, mirroring the entity path.
pub fn normalize_events(
    instances: Vec<EventInstance>,
    mkb: &Mkb,
    embedder: &dyn Embedder,
    weights: &EventMatchWeights,
    align_threshold: f32,
    batch_index: u64,
    skip_cross: bool,
) -> Result<IntraEventOutcome, AdapterError> {
    let intra = normalize_events_intra(instances, embedder, weights, align_threshold)?;
    if batch_index == 0 || skip_cross {
        return Ok(intra);
    }
    let events = align_events_cross(intra.events, mkb, embedder, weights, align_threshold)?;
    Ok(IntraEventOutcome { events, conflicts: intra.conflicts })
}
