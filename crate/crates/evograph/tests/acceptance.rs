//! Acceptance suite.
//!
//! Each test implements one acceptance criterion at its stated tolerance
//! and prints a `acceptance N (<name>): PASS` line on success; a failing
//! criterion fails its test. Run with
//!
//! ```text
//! cargo test -p evograph --test acceptance -- --nocapture
//! ```

use evograph::adapters::mock::MockEmbedder;
use evograph::adapters::{Backends, Embedder};
use evograph::config::PipelineConfig;
use evograph::extract::build_context;
use evograph::graph::{
    DeprecationRecord, EdgeStatus, EntityNode, Evidence, FactEdge, FaultPoint, GraphState,
    KnowledgeIncrement, TailRef,
};
use evograph::ids::{schema_id, EdgeId, EntityId};
use evograph::mkb::{Mkb, RelationSchema};
use evograph::pipeline::metrics::{
    delta_precision, dhp, static_prf, CanonTriple, Judgments, SupportJudgment,
};
use evograph::pipeline::{load_batch_file, process_batch, run_stream, Batch, BatchReport, StateDir};
use evograph::schema::{induce_relation_schemas, SchemaEvaluator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/stream")
}

fn window_paths() -> Vec<PathBuf> {
    (0..3).map(|w| data_dir().join(format!("window_{w}.jsonl"))).collect()
}

fn run_stream_with(cfg: &PipelineConfig) -> (Vec<BatchReport>, GraphState, Mkb) {
    let dir = tempfile::tempdir().unwrap();
    let state = StateDir::new(dir.path());
    let backends = Backends::mock(cfg).unwrap();
    let reports = run_stream(&window_paths(), &state, cfg, &backends)
        .unwrap_or_else(|a| panic!("stream aborted: {}", a.error));
    let (graph, mkb) = state.load().unwrap();
    (reports, graph, mkb)
}

// ---------------------------------------------------------------------
// 1. increment algebra vs brute-force set evaluation
// ---------------------------------------------------------------------

struct RandomCase {
    state: GraphState,
    increment: KnowledgeIncrement,
}

fn random_case(rng: &mut ChaCha8Rng, case: usize) -> RandomCase {
    let relations = ["uses", "links", "owns", "ships", "wraps"];
    let n_entities = rng.random_range(1..=100usize);
    let mut state = GraphState::new();
    state.batch_index = 1;
    for i in 0..n_entities {
        let id = EntityId::from(format!("e{case}_{i}").as_str());
        state.entities.insert(
            id.clone(),
            EntityNode {
                entity_id: id,
                canonical_name: format!("E{i}"),
                entity_type: "Entity".into(),
                created_at_batch: 1,
            },
        );
    }
    let ids: Vec<EntityId> = state.entities.keys().cloned().collect();
    let n_edges = rng.random_range(0..=150usize);
    for _ in 0..n_edges {
        let head = ids[rng.random_range(0..ids.len())].clone();
        let relation = relations[rng.random_range(0..relations.len())];
        let tail = if rng.random_bool(0.7) {
            TailRef::Entity(ids[rng.random_range(0..ids.len())].clone())
        } else {
            TailRef::Literal(format!("v{}", rng.random_range(0..20)))
        };
        let mut edge = FactEdge::active(
            head,
            relation,
            tail,
            vec![Evidence::new("seed", "seeded fact")],
            1,
        );
        if state.edges.contains_key(&edge.edge_id) {
            continue;
        }
        if rng.random_bool(0.25) {
            edge.status = EdgeStatus::Deprecated;
            edge.deprecated_at_batch = Some(1);
            edge.deprecation_evidence = Some(Evidence::new("seed", "retired"));
            state.deprecation_log.push(DeprecationRecord {
                batch_index: 1,
                edge_id: edge.edge_id.clone(),
                evidence: Evidence::new("seed", "retired"),
            });
        }
        state.edges.insert(edge.edge_id.clone(), edge);
    }

    // a valid increment over that state
    let mut new_entities = Vec::new();
    for i in 0..rng.random_range(0..=10usize) {
        let id = EntityId::from(format!("n{case}_{i}").as_str());
        new_entities.push(EntityNode {
            entity_id: id,
            canonical_name: format!("N{i}"),
            entity_type: "Entity".into(),
            created_at_batch: 2,
        });
    }
    let mut all_ids = ids.clone();
    all_ids.extend(new_entities.iter().map(|n| n.entity_id.clone()));
    let deprecated_ids: BTreeSet<EdgeId> = state
        .edges
        .values()
        .filter(|e| !e.is_active())
        .map(|e| e.edge_id.clone())
        .collect();

    let mut new_facts: Vec<FactEdge> = Vec::new();
    let mut new_fact_ids: BTreeSet<EdgeId> = BTreeSet::new();
    for _ in 0..rng.random_range(0..=20usize) {
        let head = all_ids[rng.random_range(0..all_ids.len())].clone();
        let relation = relations[rng.random_range(0..relations.len())];
        let tail = if rng.random_bool(0.7) {
            TailRef::Entity(all_ids[rng.random_range(0..all_ids.len())].clone())
        } else {
            TailRef::Literal(format!("v{}", rng.random_range(0..20)))
        };
        let edge =
            FactEdge::active(head, relation, tail, vec![Evidence::new("inc", "new fact")], 2);
        // re-asserting an active fact is legal; re-asserting a deprecated
        // one exercises surfacing, not the set algebra under test
        if deprecated_ids.contains(&edge.edge_id) || !new_fact_ids.insert(edge.edge_id.clone()) {
            continue;
        }
        new_facts.push(edge);
    }

    let reassertable: BTreeSet<EdgeId> = new_fact_ids;
    let active_ids: Vec<EdgeId> = state
        .edges
        .values()
        .filter(|e| e.is_active())
        .map(|e| e.edge_id.clone())
        .collect();
    let mut deprecations = Vec::new();
    for id in &active_ids {
        if !reassertable.contains(id) && rng.random_bool(0.2) {
            deprecations.push((id.clone(), Evidence::new("inc", "retire")));
        }
    }

    RandomCase {
        state,
        increment: KnowledgeIncrement { batch_index: 2, new_entities, new_facts, deprecations },
    }
}

#[test]
fn acceptance_1_increment_algebra() {
    let started = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    for case in 0..500 {
        let RandomCase { mut state, increment } = random_case(&mut rng, case);

        // brute-force evaluation of the update equations on id sets
        let expected_entities: BTreeSet<EntityId> = state
            .entities
            .keys()
            .cloned()
            .chain(increment.new_entities.iter().map(|n| n.entity_id.clone()))
            .collect();
        let removed: BTreeSet<EdgeId> =
            increment.deprecations.iter().map(|(id, _)| id.clone()).collect();
        let mut expected_active: BTreeSet<EdgeId> = state
            .active_edge_ids()
            .difference(&removed)
            .cloned()
            .collect();
        expected_active.extend(increment.new_facts.iter().map(|f| f.edge_id.clone()));

        let edges_before = state.edges.len();
        let outcome = state
            .apply_increment(&increment)
            .unwrap_or_else(|e| panic!("case {case}: valid increment rejected: {e}"));

        let got_entities: BTreeSet<EntityId> = state.entities.keys().cloned().collect();
        assert_eq!(got_entities, expected_entities, "case {case}: entity set");
        assert_eq!(state.active_edge_ids(), expected_active, "case {case}: active set");
        assert_eq!(
            state.edges.len(),
            edges_before + outcome.created.len(),
            "case {case}: append-only storage"
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 10, "500 cases must finish within 10 s, took {elapsed:?}");
    println!("acceptance 1 (increment algebra, 500 random cases): PASS in {elapsed:?}");
}

// ---------------------------------------------------------------------
// 2. soft-deprecation audit over the bundled stream
// ---------------------------------------------------------------------

#[test]
fn acceptance_2_soft_deprecation_audit() {
    let started = std::time::Instant::now();
    let cfg = PipelineConfig::default();
    let backends = Backends::mock(&cfg).unwrap();

    let mut graph = GraphState::new();
    let mut mkb = Mkb::new();
    let mut total_added = 0usize;
    for path in window_paths() {
        let batch = load_batch_file(&path).unwrap();
        let before = graph.edges.len();
        let out = process_batch(&batch, &graph, &mkb, &cfg, &backends, None)
            .unwrap_or_else(|a| panic!("abort: {}", a.error));
        assert_eq!(
            out.graph.edges.len(),
            before + out.report.additions.len(),
            "window {}: storage grows by exactly the effective additions",
            batch.window
        );
        assert!(out.graph.edges.len() >= before, "nothing is ever physically deleted");
        total_added += out.report.additions.len();
        graph = out.graph;
        mkb = out.mkb;
    }

    assert_eq!(graph.edges.len(), total_added, "stored edges equal the summed additions");
    let deprecated: Vec<&FactEdge> = graph.edges.values().filter(|e| !e.is_active()).collect();
    assert!(!deprecated.is_empty(), "the stream exercises soft deprecation");
    for edge in &deprecated {
        assert!(edge.deprecation_evidence.is_some(), "{}: evidence missing", edge.edge_id);
        assert!(edge.deprecated_at_batch.is_some());
        let logged = graph
            .deprecation_log
            .iter()
            .filter(|r| r.edge_id == edge.edge_id)
            .count();
        assert_eq!(logged, 1, "{}: exactly one log entry", edge.edge_id);
    }
    assert_eq!(graph.deprecation_log.len(), deprecated.len());
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 30);
    println!(
        "acceptance 2 (soft-deprecation audit: {} edges, {} deprecated, log consistent): PASS in {elapsed:?}",
        graph.edges.len(),
        deprecated.len()
    );
}

// ---------------------------------------------------------------------
// 3. atomicity under fault injection
// ---------------------------------------------------------------------

#[test]
fn acceptance_3_atomicity_under_faults() {
    let cfg = PipelineConfig::default();
    let backends = Backends::mock(&cfg).unwrap();

    // state after window 0, then window 1 with an injected fault
    let w0 = load_batch_file(&window_paths()[0]).unwrap();
    let base = process_batch(&w0, &GraphState::new(), &Mkb::new(), &cfg, &backends, None)
        .unwrap_or_else(|a| panic!("abort: {}", a.error));
    let w1 = load_batch_file(&window_paths()[1]).unwrap();

    assert!(FaultPoint::ALL.len() >= 5, "at least five injectable failure points");
    for point in FaultPoint::ALL {
        let pre_snapshot = base.graph.snapshot();

        // pipeline level: the caller's state is unaffected
        let err = process_batch(&w1, &base.graph, &base.mkb, &cfg, &backends, Some(point))
            .err()
            .unwrap_or_else(|| panic!("fault {point:?} must abort the batch"));
        assert!(err.report.abort.is_some());
        assert_eq!(base.graph.snapshot(), pre_snapshot, "{point:?}: pipeline state leaked");

        // store level: the mutating application path itself stages writes
        let mut trial = base.graph.clone();
        let increment = KnowledgeIncrement {
            batch_index: trial.batch_index + 1,
            new_entities: vec![EntityNode {
                entity_id: EntityId::from("fresh"),
                canonical_name: "Fresh".into(),
                entity_type: "Entity".into(),
                created_at_batch: trial.batch_index + 1,
            }],
            new_facts: vec![FactEdge::active(
                EntityId::from("fresh"),
                "links",
                TailRef::Literal("x".into()),
                vec![Evidence::new("d", "fresh links x")],
                trial.batch_index + 1,
            )],
            deprecations: vec![],
        };
        trial.apply_increment_with_fault(&increment, Some(point)).unwrap_err();
        assert_eq!(trial.snapshot(), pre_snapshot, "{point:?}: store writes leaked");
    }
    println!(
        "acceptance 3 (atomicity across {} fault points, byte-exact snapshots): PASS",
        FaultPoint::ALL.len()
    );
}

// ---------------------------------------------------------------------
// 4. case-study replay
// ---------------------------------------------------------------------

#[test]
fn acceptance_4_case_study_replay() {
    let cfg = PipelineConfig::default();
    let backends = Backends::mock(&cfg).unwrap();

    // window 0 establishes (PodSecurityPolicy, status, active)
    let w0 = load_batch_file(&window_paths()[0]).unwrap();
    let base = process_batch(&w0, &GraphState::new(), &Mkb::new(), &cfg, &backends, None)
        .unwrap_or_else(|a| panic!("abort: {}", a.error));

    let psp = base
        .graph
        .entities
        .values()
        .find(|n| n.canonical_name == "PodSecurityPolicy")
        .expect("PodSecurityPolicy exists after window 0")
        .entity_id
        .clone();
    let old_status_edge = base
        .graph
        .active_facts(&psp)
        .into_iter()
        .find(|e| e.relation == "status" && e.tail.value() == "active")
        .expect("the active status fact exists")
        .edge_id
        .clone();

    // the case document alone as window 1
    let case = Batch {
        window: 1,
        docs: vec![evograph::extract::Document {
            doc_id: "case".into(),
            text: "The PodSecurityPolicy API is deprecated in v1.21 and will be removed in v1.25."
                .into(),
            window: 1,
            timestamp: None,
        }],
    };
    let out = process_batch(&case, &base.graph, &base.mkb, &cfg, &backends, None)
        .unwrap_or_else(|a| panic!("abort: {}", a.error));

    // exactly one addition: (PodSecurityPolicy, status, deprecated)
    assert_eq!(out.report.additions.len(), 1, "exactly one fact is added");
    let added = out.graph.edge(&out.report.additions[0]).unwrap();
    assert_eq!(added.head, psp);
    assert_eq!(added.relation, "status");
    assert_eq!(added.tail, TailRef::Literal("deprecated".into()));
    assert_eq!(added.status, EdgeStatus::Active);

    // exactly one soft deprecation: the old (status, active) fact
    assert_eq!(out.report.deprecations.len(), 1, "exactly one fact is retired");
    assert_eq!(out.report.deprecations[0].0, old_status_edge);
    let retired = out.graph.edge(&old_status_edge).unwrap();
    assert_eq!(retired.status, EdgeStatus::Deprecated);
    assert!(retired
        .deprecation_evidence
        .as_ref()
        .unwrap()
        .span
        .contains("deprecated in v1.21"));

    // nothing else changes shape: no new entities, no event node
    assert!(out.report.entities_created.is_empty(), "the entity is reused, not re-minted");
    assert_eq!(out.report.entities_reused, vec![psp]);
    assert_eq!(out.graph.entities.len(), base.graph.entities.len());
    println!("acceptance 4 (case-study replay: add + soft-deprecate pair, exact): PASS");
}

// ---------------------------------------------------------------------
// 5. schema-promotion boundary and the closed loop
// ---------------------------------------------------------------------

struct AlwaysPass;

impl SchemaEvaluator for AlwaysPass {
    fn evaluate_relation(
        &self,
        _label: &str,
        _members: &[String],
    ) -> Result<bool, evograph::adapters::AdapterError> {
        Ok(true)
    }
    fn evaluate_event(
        &self,
        _event_type: &str,
        _roles: &[String],
    ) -> Result<bool, evograph::adapters::AdapterError> {
        Ok(true)
    }
}

#[test]
fn acceptance_5_promotion_boundary_and_closed_loop() {
    let cfg = PipelineConfig::default();
    assert_eq!(cfg.thresholds.theta, 3);
    let embedder = MockEmbedder::default();
    let types: BTreeMap<EntityId, String> = BTreeMap::new();

    let triple = |i: usize| evograph::extract::ResolvedTriple {
        head: EntityId::from(format!("h{i}").as_str()),
        relation: "supports_feature".to_string(),
        tail: TailRef::Literal("on".into()),
        evidence: vec![Evidence::new("d", "h supports_feature on")],
        confidence: 1.0,
    };

    // θ−1 occurrences promote nothing
    let two: Vec<_> = (0..2).map(triple).collect();
    let out = induce_relation_schemas(&two, &types, vec![], &Mkb::new(), &embedder, &AlwaysPass, &cfg)
        .unwrap();
    assert!(out.promoted.is_empty(), "θ−1 occurrences never promote");
    assert_eq!(out.pending.len(), 1);

    // θ occurrences promote exactly one schema
    let three: Vec<_> = (0..3).map(triple).collect();
    let out =
        induce_relation_schemas(&three, &types, vec![], &Mkb::new(), &embedder, &AlwaysPass, &cfg)
            .unwrap();
    assert_eq!(out.promoted.len(), 1, "θ occurrences promote exactly one schema");
    let schema = out.promoted.into_iter().next().unwrap();
    let schema_id = schema.schema_id.clone();

    // the closed loop: the promoted schema is retrievable by the next
    // batch's context builder
    let mut mkb = Mkb::new();
    mkb.register_relation_schema(schema).unwrap();
    let docs = vec![evograph::extract::Document {
        doc_id: "d0".into(),
        text: "Widget supports_feature on.".into(),
        window: 1,
        timestamp: None,
    }];
    let ctx = build_context(&docs, 1, &mkb, &embedder, cfg.thresholds.retrieval_k).unwrap();
    assert!(
        ctx.schemas.iter().any(|s| s.schema_id == schema_id),
        "promoted schema reaches the next batch's extraction context"
    );
    println!("acceptance 5 (promotion boundary at θ=3 and closed-loop retrieval): PASS");
}

// ---------------------------------------------------------------------
// 6. metric formulas vs a counting oracle
// ---------------------------------------------------------------------

#[test]
fn acceptance_6_metric_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    for case in 0..1000 {
        // incremental metrics
        let n_add = rng.random_range(0..=20usize);
        let n_dep = rng.random_range(0..=10usize);
        let mut report = BatchReport::new(1);
        let mut judgments = Judgments::default();
        for i in 0..n_add {
            let id = EdgeId::from(format!("a{case}_{i}").as_str());
            report.additions.push(id.clone());
            let j = match rng.random_range(0..3) {
                0 => SupportJudgment::FullySupported,
                1 => SupportJudgment::PartiallySupported,
                _ => SupportJudgment::NotSupported,
            };
            judgments.support.insert(id, j);
        }
        for i in 0..n_dep {
            let id = EdgeId::from(format!("d{case}_{i}").as_str());
            report.deprecations.push((id.clone(), Evidence::new("d", "e")));
            judgments.deletion.insert(id, rng.random_bool(0.8));
        }

        // counting oracle
        let mut fully = 0usize;
        for id in &report.additions {
            if judgments.support[id] == SupportJudgment::FullySupported {
                fully += 1;
            }
        }
        let expected_dp =
            (!report.additions.is_empty()).then(|| fully as f64 / report.additions.len() as f64);
        let mut justified = 0usize;
        for (id, _) in &report.deprecations {
            if judgments.deletion[id] {
                justified += 1;
            }
        }
        let expected_dhp = (!report.deprecations.is_empty())
            .then(|| justified as f64 / report.deprecations.len() as f64);

        assert_eq!(
            delta_precision(&report, &judgments).unwrap().delta_precision,
            expected_dp,
            "case {case}"
        );
        assert_eq!(dhp(&report, &judgments).unwrap().dhp, expected_dhp, "case {case}");

        // static P/R/F1 against a nested-loop oracle
        let pool: Vec<CanonTriple> = (0..12)
            .map(|i| CanonTriple::new(&format!("h{i}"), "rel", &format!("t{}", i % 4)))
            .collect();
        let pick = |rng: &mut ChaCha8Rng, up_to: usize| -> Vec<CanonTriple> {
            (0..rng.random_range(0..=up_to))
                .map(|_| pool[rng.random_range(0..pool.len())].clone())
                .collect()
        };
        let predicted = pick(&mut rng, 8);
        let gold = pick(&mut rng, 8);
        let got = static_prf(&predicted, &gold);

        let pset: BTreeSet<&CanonTriple> = predicted.iter().collect();
        let gset: BTreeSet<&CanonTriple> = gold.iter().collect();
        let mut matched_p = 0usize;
        for p in &pset {
            let mut hit = false;
            for g in &gset {
                if p == g {
                    hit = true;
                }
            }
            if hit {
                matched_p += 1;
            }
        }
        let mut matched_g = 0usize;
        for g in &gset {
            let mut hit = false;
            for p in &pset {
                if p == g {
                    hit = true;
                }
            }
            if hit {
                matched_g += 1;
            }
        }
        let expected_p = (!pset.is_empty()).then(|| matched_p as f64 / pset.len() as f64);
        let expected_r = (!gset.is_empty()).then(|| matched_g as f64 / gset.len() as f64);
        let expected_f1 = match (expected_p, expected_r) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        };
        assert_eq!(got.precision, expected_p, "case {case}");
        assert_eq!(got.recall, expected_r, "case {case}");
        assert_eq!(got.f1, expected_f1, "case {case}");
    }
    println!("acceptance 6 (metric oracle equivalence over 1000 cases, exact): PASS");
}

// ---------------------------------------------------------------------
// 7. ablation directionality
// ---------------------------------------------------------------------

#[test]
fn acceptance_7_ablation_directionality() {
    let full_cfg = PipelineConfig::default();
    let (full_reports, full_graph, _) = run_stream_with(&full_cfg);
    let full_deprecations: usize = full_reports.iter().map(|r| r.deprecations.len()).sum();
    assert!(full_deprecations >= 1, "the full model executes deprecations");

    // the correctly targeted retirement: the old (status, active) fact
    let golden_target: BTreeSet<EdgeId> = full_graph
        .edges
        .values()
        .filter(|e| !e.is_active())
        .map(|e| e.edge_id.clone())
        .collect();

    let mut no_intent = PipelineConfig::default();
    no_intent.ablation.disable_intent = true;
    let (reports, _, _) = run_stream_with(&no_intent);
    let judgments = Judgments::default();
    for r in &reports {
        assert!(r.deprecations.is_empty(), "no intent means no deprecations");
        assert_eq!(dhp(r, &judgments).unwrap().dhp, None, "D-HP is N/A without deprecations");
    }
    // stage isolation: the cold window carries no evolutionary events, so
    // disabling intent must change nothing there
    assert_eq!(
        reports[0].to_json(),
        full_reports[0].to_json(),
        "intent ablation only affects its own stage"
    );

    let mut no_events = PipelineConfig::default();
    no_events.ablation.disable_events = true;
    let (reports, _, _) = run_stream_with(&no_events);
    for r in &reports {
        assert!(r.deprecations.is_empty(), "no events means no deprecations");
        assert_eq!(dhp(r, &judgments).unwrap().dhp, None);
    }

    let mut no_coref = PipelineConfig::default();
    no_coref.ablation.disable_cross_batch_coref = true;
    let (reports, graph, _) = run_stream_with(&no_coref);
    // stage isolation: the cold window never cross-aligns anyway
    assert_eq!(
        reports[0].to_json(),
        full_reports[0].to_json(),
        "coreference ablation only affects its own stage"
    );
    assert!(
        graph.entities.len() > full_graph.entities.len(),
        "fragmentation: {} entities without coreference vs {} with",
        graph.entities.len(),
        full_graph.entities.len()
    );
    let correctly_targeted = reports
        .iter()
        .flat_map(|r| r.deprecations.iter())
        .filter(|(id, _)| golden_target.contains(id))
        .count();
    assert!(
        correctly_targeted < full_deprecations,
        "fragmentation must lose deprecation targets ({correctly_targeted} vs {full_deprecations})"
    );
    println!(
        "acceptance 7 (ablations: no-intent/no-events ⇒ zero deprecations; no-coref ⇒ {} > {} entities, {} < {} targeted): PASS",
        graph.entities.len(),
        full_graph.entities.len(),
        correctly_targeted,
        full_deprecations
    );
}

// ---------------------------------------------------------------------
// 8. determinism of full mock runs
// ---------------------------------------------------------------------

#[test]
fn acceptance_8_determinism() {
    let cfg = PipelineConfig::default();
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let state = StateDir::new(dir.path());
        let backends = Backends::mock(&cfg).unwrap();
        let reports = run_stream(&window_paths(), &state, &cfg, &backends)
            .unwrap_or_else(|a| panic!("stream aborted: {}", a.error));
        let graph_export = std::fs::read(state.graph_export_path()).unwrap();
        let mkb_export = std::fs::read(state.mkb_export_path()).unwrap();
        let report_bytes: Vec<String> = reports.iter().map(|r| r.to_json()).collect();
        (graph_export, mkb_export, report_bytes)
    };
    let first = run();
    let second = run();
    assert_eq!(first.0, second.0, "graph exports must be byte-identical");
    assert_eq!(first.1, second.1, "MKB snapshots must be byte-identical");
    assert_eq!(first.2, second.2, "batch reports must be byte-identical");
    println!("acceptance 8 (two full runs, byte-identical artifacts): PASS");
}

// ---------------------------------------------------------------------
// 9. retrieval contract at K = 30
// ---------------------------------------------------------------------

#[test]
fn acceptance_9_retrieval_contract() {
    let cfg = PipelineConfig::default();
    assert_eq!(cfg.thresholds.retrieval_k, 30, "default retrieval K");
    let embedder = MockEmbedder::default();

    let schema = |label: &str| RelationSchema {
        schema_id: schema_id("rel", label),
        relation_label: label.to_string(),
        domain_type: "Entity".into(),
        range_type: "Entity".into(),
        properties: BTreeSet::new(),
        support_count: 3,
        embedding: embedder.embed_one(label).unwrap(),
    };

    let docs = vec![evograph::extract::Document {
        doc_id: "d0".into(),
        text: "Widget relation_7 Gadget.".into(),
        window: 1,
        timestamp: None,
    }];

    // more than 30 promoted schemas → exactly 30 injected, ranking exact
    let mut mkb = Mkb::new();
    let labels: Vec<String> = (0..35).map(|i| format!("relation_{i}")).collect();
    for l in &labels {
        mkb.register_relation_schema(schema(l)).unwrap();
    }
    let ctx = build_context(&docs, 1, &mkb, &embedder, cfg.thresholds.retrieval_k).unwrap();
    assert_eq!(ctx.schemas.len(), 30, "exactly K schemas injected");

    // full-scan oracle over the same query embedding
    let texts: Vec<String> = docs.iter().map(|d| d.text.clone()).collect();
    let centroid =
        evograph::adapters::EmbeddingVector::centroid(&embedder.embed(&texts).unwrap());
    let mut oracle: Vec<(String, f32)> = labels
        .iter()
        .map(|l| (l.clone(), embedder.embed_one(l).unwrap().cosine(&centroid)))
        .collect();
    oracle.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| schema_id("rel", &a.0).cmp(&schema_id("rel", &b.0)))
    });
    let got: Vec<(String, f32)> =
        ctx.schemas.iter().map(|s| (s.label.clone(), s.score)).collect();
    assert_eq!(got, oracle[..30].to_vec(), "ranking equals the exhaustive scan");

    // fewer than K → all of them
    let mut small = Mkb::new();
    for l in labels.iter().take(5) {
        small.register_relation_schema(schema(l)).unwrap();
    }
    let ctx = build_context(&docs, 1, &small, &embedder, cfg.thresholds.retrieval_k).unwrap();
    assert_eq!(ctx.schemas.len(), 5, "fewer than K schemas → all of them");
    println!("acceptance 9 (retrieval contract at K=30, exact full-scan ranking): PASS");
}
