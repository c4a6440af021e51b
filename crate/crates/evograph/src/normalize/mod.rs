//! Two-level coreference alignment.
//!
//! Entity mentions (and event instances, see [`events`]) are first
//! canonicalized within the batch — greedy single-link clustering over
//! embedding cosine, gated by inferred type, confirmed pair-by-pair by an
//! adjudicator — and then aligned across batches against the MKB, where a
//! cluster either reuses a historical entity id or mints a new one.
//!
//! On the cold-start batch only the intra step runs; the same is true when
//! cross-batch alignment is ablated, which is exactly the fragmentation
//! experiment: recurring entities split into per-batch nodes.

pub mod events;

use crate::adapters::{AdapterError, Embedder, EmbeddingVector};
use crate::ids::{mint_entity_id, EntityId};
use crate::mkb::Mkb;
use crate::par;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Verdict for an intra-batch mention pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairVerdict {
    /// Same entity; link the mentions.
    Merge,
    /// Parent-child typing relation; keep the mentions separate and record
    /// the edge as profile metadata.
    Hierarchy {
        /// True when the first mention of the pair is the parent.
        parent_is_first: bool,
    },
    /// Distinct entities.
    Separate,
}

/// Cluster view handed to the adjudicator during cross-batch alignment.
#[derive(Debug, Clone)]
pub struct ClusterSummary<'a> {
    pub canonical: &'a str,
    pub entity_type: &'a str,
    pub members: &'a [String],
}

/// A historical profile candidate for id reuse.
#[derive(Debug, Clone)]
pub struct ReuseCandidate {
    pub entity_id: EntityId,
    pub canonical_name: String,
    pub entity_type: String,
    pub similarity: f32,
    /// Some member surface form matches one of the profile's aliases
    /// exactly (case-insensitive).
    pub exact_alias_match: bool,
}

/// Pairwise decisions for coreference.
pub trait PairAdjudicator: Send + Sync {
    fn adjudicate_mention_pair(
        &self,
        first: &str,
        second: &str,
        inferred_type: &str,
    ) -> Result<PairVerdict, AdapterError>;

    /// Decide whether a cluster is the same entity as a retrieved profile.
    fn confirm_reuse(
        &self,
        cluster: &ClusterSummary<'_>,
        candidate: &ReuseCandidate,
    ) -> Result<bool, AdapterError>;
}

/// Entity-type inference for a mention surface form.
pub trait TypeInferencer: Send + Sync {
    fn infer_type(&self, mention: &str) -> Result<String, AdapterError>;
}

/// An intra-batch cluster of coreferent mentions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MentionCluster {
    /// Distinct member surface forms, sorted.
    pub members: Vec<String>,
    /// Longest member; ties broken lexicographically.
    pub canonical_mention: String,
    pub inferred_type: String,
    pub centroid: EmbeddingVector,
}

/// Output of intra-batch entity normalization.
#[derive(Debug, Clone, Default)]
pub struct IntraEntityOutcome {
    pub clusters: Vec<MentionCluster>,
    /// (child surface form, parent surface form) typing edges from
    /// `Hierarchy` verdicts; stored as profile metadata downstream.
    pub hierarchy_edges: Vec<(String, String)>,
}

impl IntraEntityOutcome {
    /// Cluster index for a member surface form.
    pub fn cluster_of(&self, mention: &str) -> Option<usize> {
        self.clusters.iter().position(|c| c.members.iter().any(|m| m == mention))
    }
}

fn canonical_mention(members: &[String]) -> String {
    members
        .iter()
        .max_by(|a, b| a.len().cmp(&b.len()).then_with(|| b.cmp(a)))
        .cloned()
        .unwrap_or_default()
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }
    fn find(&mut self, i: usize) -> usize {
        if self.0[i] != i {
            let root = self.find(self.0[i]);
            self.0[i] = root;
        }
        self.0[i]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.0[hi] = lo;
        }
    }
}

/// Intra-batch normalization: partition mention surface forms into
/// same-entity clusters. Mentions of different inferred types are never
/// merged, and every candidate link is confirmed by the adjudicator before
/// the transitive closure is taken.
pub fn normalize_entities_intra(
    mentions: &[String],
    embedder: &dyn Embedder,
    typer: &dyn TypeInferencer,
    adjudicator: &dyn PairAdjudicator,
    tau_cluster: f32,
) -> Result<IntraEntityOutcome, AdapterError> {
    let distinct: Vec<String> = {
        let set: BTreeSet<&String> = mentions.iter().collect();
        set.into_iter().cloned().collect()
    };
    if distinct.is_empty() {
        return Ok(IntraEntityOutcome::default());
    }

    let types: Vec<String> = par::map_slice(&distinct, |m| typer.infer_type(m))
        .into_iter()
        .collect::<Result<_, _>>()?;
    let embeddings = embedder.embed(&distinct)?;

    // Candidate links: same type and cosine at or above the threshold.
    let candidate_pairs: Vec<(usize, usize)> = {
        let rows = par::map_range(distinct.len(), |i| {
            let mut row = Vec::new();
            for j in (i + 1)..distinct.len() {
                if types[i] == types[j] && embeddings[i].cosine(&embeddings[j]) >= tau_cluster {
                    row.push((i, j));
                }
            }
            row
        });
        rows.into_iter().flatten().collect()
    };

    let mut links = DisjointSet::new(distinct.len());
    let mut hierarchy_edges = Vec::new();
    for (i, j) in candidate_pairs {
        match adjudicator.adjudicate_mention_pair(&distinct[i], &distinct[j], &types[i])? {
            PairVerdict::Merge => links.union(i, j),
            PairVerdict::Hierarchy { parent_is_first } => {
                let (child, parent) = if parent_is_first { (j, i) } else { (i, j) };
                hierarchy_edges.push((distinct[child].clone(), distinct[parent].clone()));
            }
            PairVerdict::Separate => {}
        }
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..distinct.len() {
        groups.entry(links.find(i)).or_default().push(i);
    }

    let mut clusters: Vec<MentionCluster> = groups
        .into_values()
        .map(|idxs| {
            let members: Vec<String> = idxs.iter().map(|&i| distinct[i].clone()).collect();
            let member_vecs: Vec<EmbeddingVector> =
                idxs.iter().map(|&i| embeddings[i].clone()).collect();
            MentionCluster {
                canonical_mention: canonical_mention(&members),
                inferred_type: types[idxs[0]].clone(),
                centroid: EmbeddingVector::centroid(&member_vecs),
                members,
            }
        })
        .collect();
    clusters.sort_by(|a, b| a.canonical_mention.cmp(&b.canonical_mention));

    Ok(IntraEntityOutcome { clusters, hierarchy_edges })
}

/// How a cluster maps onto the graph's entity space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assignment {
    /// The adjudicator confirmed a historical profile.
    Reused(EntityId),
    /// A fresh deterministic id was minted for this batch.
    Created(EntityId),
}

impl Assignment {
    pub fn entity_id(&self) -> &EntityId {
        match self {
            Assignment::Reused(id) | Assignment::Created(id) => id,
        }
    }

    pub fn is_created(&self) -> bool {
        matches!(self, Assignment::Created(_))
    }
}

/// Cross-batch alignment: map each cluster to exactly one entity id.
/// Historical ids are reused only when the adjudicator confirms a retrieved
/// candidate; otherwise a deterministic id is minted from the canonical
/// mention.
pub fn align_entities_cross(
    clusters: &[MentionCluster],
    mkb: &Mkb,
    adjudicator: &dyn PairAdjudicator,
    candidate_count: usize,
    batch_index: u64,
) -> Result<Vec<Assignment>, AdapterError> {
    let mut assignments = Vec::with_capacity(clusters.len());
    let mut minted: BTreeSet<EntityId> = BTreeSet::new();

    for cluster in clusters {
        // Exact alias hits first, then embedding neighbours.
        let mut candidates: Vec<ReuseCandidate> = Vec::new();
        let mut seen: BTreeSet<EntityId> = BTreeSet::new();
        for member in &cluster.members {
            for profile in mkb.lookup_alias(member) {
                if seen.insert(profile.entity_id.clone()) {
                    candidates.push(ReuseCandidate {
                        entity_id: profile.entity_id.clone(),
                        canonical_name: profile.canonical_name.clone(),
                        entity_type: profile.entity_type.clone(),
                        similarity: profile.embedding.cosine(&cluster.centroid),
                        exact_alias_match: true,
                    });
                }
            }
        }
        let neighbours = mkb
            .match_entity(&cluster.centroid, candidate_count)
            .map_err(|e| AdapterError::InvalidInput(e.to_string()))?;
        for (id, similarity) in neighbours {
            if seen.insert(id.clone()) {
                let profile = mkb.profile(&id).expect("retrieved profile exists");
                candidates.push(ReuseCandidate {
                    entity_id: id,
                    canonical_name: profile.canonical_name.clone(),
                    entity_type: profile.entity_type.clone(),
                    similarity,
                    exact_alias_match: false,
                });
            }
        }

        let summary = ClusterSummary {
            canonical: &cluster.canonical_mention,
            entity_type: &cluster.inferred_type,
            members: &cluster.members,
        };
        let mut assigned = None;
        for candidate in &candidates {
            if adjudicator.confirm_reuse(&summary, candidate)? {
                assigned = Some(Assignment::Reused(candidate.entity_id.clone()));
                break;
            }
        }
        let assignment = assigned.unwrap_or_else(|| {
            let mut id =
                mint_entity_id(&cluster.canonical_mention, &cluster.inferred_type, batch_index);
            let mut salt = 2u32;
            while minted.contains(&id) || mkb.profile(&id).is_some() {
                id = EntityId(format!("{}~{salt}", id.as_str()));
                salt += 1;
            }
            Assignment::Created(id)
        });
        if let Assignment::Created(id) = &assignment {
            minted.insert(id.clone());
        }
        assignments.push(assignment);
    }
    Ok(assignments)
}

/// All clusters map to fresh ids — the cold-start path and the ablated
/// (no cross-batch coreference) path.
pub fn assign_all_new(clusters: &[MentionCluster], batch_index: u64) -> Vec<Assignment> {
    let mut minted: BTreeSet<EntityId> = BTreeSet::new();
    clusters
        .iter()
        .map(|cluster| {
            let mut id =
                mint_entity_id(&cluster.canonical_mention, &cluster.inferred_type, batch_index);
            let mut salt = 2u32;
            while minted.contains(&id) {
                id = EntityId(format!("{}~{salt}", id.as_str()));
                salt += 1;
            }
            minted.insert(id.clone());
            Assignment::Created(id)
        })
        .collect()
}

/// Fused convenience path: intra normalization followed by cross-batch
/// alignment (skipped on the cold-start batch or when ablated).
#[allow(clippy::too_many_arguments)]
pub fn normalize_entities(
    mentions: &[String],
    mkb: &Mkb,
    embedder: &dyn Embedder,
    typer: &dyn TypeInferencer,
    adjudicator: &dyn PairAdjudicator,
    tau_cluster: f32,
    candidate_count: usize,
    batch_index: u64,
    skip_cross: bool,
) -> Result<(IntraEntityOutcome, Vec<Assignment>), AdapterError> {
    let intra = normalize_entities_intra(mentions, embedder, typer, adjudicator, tau_cluster)?;
    let assignments = if batch_index == 0 || skip_cross {
        assign_all_new(&intra.clusters, batch_index)
    } else {
        align_entities_cross(&intra.clusters, mkb, adjudicator, candidate_count, batch_index)?
    };
    Ok((intra, assignments))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::mock::{FixtureEmbedder, MockAdjudicator, MockTypeInferencer};
    use crate::adapters::FixtureTable;
    use crate::mkb::EntityProfile;
    use std::sync::Arc;

    fn fixtures(entries: &[(&str, &str)]) -> Arc<FixtureTable> {
        let mut t = FixtureTable::new();
        for (k, v) in entries {
            t.insert(*k, *v);
        }
        Arc::new(t)
    }

    /// K8s ~ Kubernetes at 0.95, both far from Docker.
    fn handset_embedder() -> FixtureEmbedder {
        let mut e = FixtureEmbedder::new(4);
        e.set("K8s", vec![1.0, 0.0, 0.0, 0.0]);
        e.set("Kubernetes", vec![0.95, (1.0f32 - 0.95 * 0.95).sqrt(), 0.0, 0.0]);
        e.set("Docker", vec![0.2, 0.0, (1.0f32 - 0.04).sqrt(), 0.0]);
        e
    }

    fn typer() -> MockTypeInferencer {
        MockTypeInferencer::new(fixtures(&[]))
    }

    fn adjudicator() -> MockAdjudicator {
        MockAdjudicator::new(fixtures(&[]), 0.95)
    }

    #[test]
    fn zero_mentions_zero_clusters() {
        let out = normalize_entities_intra(&[], &handset_embedder(), &typer(), &adjudicator(), 0.85)
            .unwrap();
        assert!(out.clusters.is_empty());
    }

    #[test]
    fn singleton_cluster_is_its_own_canonical() {
        let out = normalize_entities_intra(
            &["K8s".to_string()],
            &handset_embedder(),
            &typer(),
            &adjudicator(),
            0.85,
        )
        .unwrap();
        assert_eq!(out.clusters.len(), 1);
        assert_eq!(out.clusters[0].canonical_mention, "K8s");
        assert_eq!(out.clusters[0].members, vec!["K8s".to_string()]);
    }

    #[test]
    fn handset_similarities_make_two_clusters() {
        let mentions: Vec<String> =
            ["K8s", "Kubernetes", "Docker"].iter().map(|s| s.to_string()).collect();
        let out = normalize_entities_intra(
            &mentions,
            &handset_embedder(),
            &typer(),
            &adjudicator(),
            0.85,
        )
        .unwrap();
        assert_eq!(out.clusters.len(), 2);
        let big = out.clusters.iter().find(|c| c.members.len() == 2).unwrap();
        assert_eq!(big.canonical_mention, "Kubernetes", "longest member wins");
        assert!(big.members.contains(&"K8s".to_string()));

        // partition validity: each mention in exactly one cluster
        let mut all: Vec<&String> = out.clusters.iter().flat_map(|c| c.members.iter()).collect();
        all.sort();
        assert_eq!(all.len(), 3);
        all.dedup();
        assert_eq!(all.len(), 3);
    }

    #[test]
    fn cross_type_pairs_are_never_merged() {
        // identical embeddings but different fixture types
        let mut e = FixtureEmbedder::new(2);
        e.set("Amazon", vec![1.0, 0.0]);
        e.set("AmazonRiver", vec![1.0, 0.0]);
        let typer = MockTypeInferencer::new(fixtures(&[
            ("type|Amazon", "Organization"),
            ("type|AmazonRiver", "Location"),
        ]));
        let out = normalize_entities_intra(
            &["Amazon".to_string(), "AmazonRiver".to_string()],
            &e,
            &typer,
            &adjudicator(),
            0.85,
        )
        .unwrap();
        assert_eq!(out.clusters.len(), 2);
    }

    #[test]
    fn scripted_hierarchy_keeps_clusters_separate() {
        let adj = MockAdjudicator::new(
            fixtures(&[("pair|K8s|Kubernetes", "hierarchy:second_is_parent")]),
            0.95,
        );
        let mentions: Vec<String> = ["K8s", "Kubernetes"].iter().map(|s| s.to_string()).collect();
        let out =
            normalize_entities_intra(&mentions, &handset_embedder(), &typer(), &adj, 0.85).unwrap();
        assert_eq!(out.clusters.len(), 2);
        assert_eq!(out.hierarchy_edges, vec![("K8s".to_string(), "Kubernetes".to_string())]);
    }

    #[test]
    fn empty_mkb_creates_all_new_ids() {
        let mentions: Vec<String> = ["K8s", "Docker"].iter().map(|s| s.to_string()).collect();
        let out = normalize_entities_intra(
            &mentions,
            &handset_embedder(),
            &typer(),
            &adjudicator(),
            0.85,
        )
        .unwrap();
        let assignments =
            align_entities_cross(&out.clusters, &Mkb::new(), &adjudicator(), 5, 1).unwrap();
        assert!(assignments.iter().all(|a| a.is_created()));
        // injectivity
        let ids: BTreeSet<_> = assignments.iter().map(|a| a.entity_id().clone()).collect();
        assert_eq!(ids.len(), assignments.len());
    }

    #[test]
    fn exact_alias_reuses_historical_id() {
        let embedder = handset_embedder();
        let mut mkb = Mkb::new();
        let hist = EntityId::from("kubernetes.b0.aaaa");
        let mut profile = EntityProfile::new(
            hist.clone(),
            "Kubernetes",
            "Entity",
            0,
            embedder.embed_one("Kubernetes").unwrap(),
        );
        profile.aliases.insert("K8s".into());
        mkb.upsert_entity_profile(profile);

        let out = normalize_entities_intra(
            &["K8s".to_string()],
            &embedder,
            &typer(),
            &adjudicator(),
            0.85,
        )
        .unwrap();
        let assignments =
            align_entities_cross(&out.clusters, &mkb, &adjudicator(), 5, 1).unwrap();
        assert_eq!(assignments, vec![Assignment::Reused(hist)]);
    }

    #[test]
    fn distinct_clusters_never_share_a_minted_id() {
        // same canonical mention forced into two clusters via Separate
        let adj = MockAdjudicator::new(fixtures(&[("pair|Alpha|Alpha ", "separate")]), 0.95);
        let mut e = FixtureEmbedder::new(2);
        e.set("Alpha", vec![1.0, 0.0]);
        e.set("Alpha ", vec![1.0, 0.0]);
        let out = normalize_entities_intra(
            &["Alpha".to_string(), "Alpha ".to_string()],
            &e,
            &typer(),
            &adj,
            0.85,
        )
        .unwrap();
        assert_eq!(out.clusters.len(), 2);
        let assignments = assign_all_new(&out.clusters, 3);
        let ids: BTreeSet<_> = assignments.iter().map(|a| a.entity_id().clone()).collect();
        assert_eq!(ids.len(), 2);
    }

    #[test]
    fn separate_calls_compose_like_the_fused_path() {
        let embedder = handset_embedder();
        let mentions: Vec<String> =
            ["K8s", "Kubernetes", "Docker"].iter().map(|s| s.to_string()).collect();
        let adj = adjudicator();
        let ty = typer();

        let intra =
            normalize_entities_intra(&mentions, &embedder, &ty, &adj, 0.85).unwrap();
        let cross = align_entities_cross(&intra.clusters, &Mkb::new(), &adj, 5, 2).unwrap();

        let (fused_clusters, fused_assignments) =
            normalize_entities(&mentions, &Mkb::new(), &embedder, &ty, &adj, 0.85, 5, 2, false)
                .unwrap();
        assert_eq!(fused_clusters.clusters, intra.clusters);
        assert_eq!(fused_assignments, cross);
    }
}
