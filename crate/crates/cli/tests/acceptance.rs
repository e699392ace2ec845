//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs without the libtest harness so the lines always print.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use gate_cli::scenario::{run_scenario, QueryRun, Scenario, ScenarioReport};
use gate_core::canonical::hash_excluding;
use gate_core::certificate::{ConfigRef, RegimeDescriptor, VERIFIER_VERSION};
use gate_core::contest::Ground;
use gate_core::decision::{threshold_status_at_stage, ArgmaxMode, ArgmaxPredicate};
use gate_core::gate::Query;
use gate_core::monotone::MonotoneFn;
use gate_core::network::evaluate_point;
use gate_core::propagation::{bound_linear_spec, propagate_relu};
use gate_core::record::{
    ItemProvenance, QueryMeta, ScopeFailure, ScopeOutcome, StandingOutcome, TimeWindow, Timestamp,
};
use gate_core::{
    budgeted_decide, check_certificate, check_certificate_value, classify_undetermined, derive_decider,
    evaluate_interface, monotonize, recheck, refine, replay_verify, revise_status, submit_challenge, CertificateToken,
    Challenge, CheckContext, DeploymentContract, EnclosureVector, FailureCode, FeatureSpec, ForcingWitness, GateError,
    InputBox, Interval, Layer, NetworkModel, PolicyBundle, Predicate, Rational, ReasonClass, RecordItem, RecordStore,
    RefinementState, ReplayResult, ScopePolicy, StandingPolicy, Status,
};
use num_rational::Ratio;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Verdict = Result<String, String>;

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

fn q(s: &str) -> Rational {
    gate_core::rational::q(s)
}

fn iv(lo: Rational, hi: Rational) -> Interval {
    Interval::new(lo, hi).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn scenario(name: &str) -> ScenarioReport {
    run_scenario(&Scenario::builtin(name).unwrap().unwrap()).unwrap()
}

fn bound_of(run: &QueryRun) -> Option<Interval> {
    run.bounds()
}

// 1 -------------------------------------------------------------------------

fn golden_run() -> Verdict {
    let start = Instant::now();
    let main = scenario("tooth_social");
    let exo = scenario("tooth_social_exoneration");
    let elapsed = start.elapsed();

    let s1 = &main.runs[0];
    ensure(s1.output.status == Status::U, || {
        format!("stage 1 is {}", s1.output.status)
    })?;
    ensure(s1.output.reason() == Some(ReasonClass::Model), || {
        "stage 1 reason is not U-MODEL".into()
    })?;
    ensure(bound_of(s1) == Some(iv(q("21/50"), q("81/100"))), || {
        format!("stage 1 bounds {:?}", bound_of(s1))
    })?;

    let s2 = &main.runs[1];
    ensure(s2.output.status == Status::A, || {
        format!("stage 2 is {}", s2.output.status)
    })?;
    let cert = &s2.output.certificates()[0];
    match (&cert.witness, &cert.claim.predicate) {
        (ForcingWitness::Bound { interval, .. }, Predicate::Threshold(p)) => {
            ensure(interval == &iv(q("19/25"), q("21/25")), || {
                format!("stage 2 witness {interval:?}")
            })?;
            ensure(p.tau == q("7/10"), || "stage 2 tau".into())?;
        }
        _ => return Err("stage 2 witness is not a threshold bound".into()),
    }

    let e2 = &exo.runs[1];
    ensure(exo.runs[0].output.status == Status::U, || {
        "exoneration stage 1 is not U".into()
    })?;
    ensure(e2.output.status == Status::D, || {
        format!("exoneration stage 2 is {}", e2.output.status)
    })?;
    ensure(bound_of(e2) == Some(iv(q("3/25"), q("29/100"))), || {
        format!("exoneration bounds {:?}", bound_of(e2))
    })?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "U-MODEL [21/50, 81/100] at stage {}, A [19/25, 21/25] at stage {}, D [3/25, 29/100]; {:.1} ms",
        s1.stages().unwrap_or(0),
        s2.stages().unwrap_or(0),
        elapsed.as_secs_f64() * 1e3
    ))
}

// 2 -------------------------------------------------------------------------

fn boundary_convention() -> Verdict {
    let tau = q("0.7");
    let a = threshold_status_at_stage(&iv(q("0.6"), q("0.7")), &tau);
    let b = threshold_status_at_stage(&iv(q("0.7"), q("0.7")), &tau);
    ensure(a == Status::U && b == Status::A, || format!("got {a} and {b}"))?;
    Ok("[0.6, 0.7] -> U, [0.7, 0.7] -> A".into())
}

// 3, 4 ---------------------------------------------------------------------

/// Raw stage intervals around a hidden true value, so every prefix
/// intersection is non-empty, and a threshold near that value.
fn random_history(rng: &mut ChaCha8Rng) -> (Vec<Interval>, Rational) {
    let den = 64;
    let c = rng.gen_range(-64..=64i64);
    let len = rng.gen_range(1..=12);
    let raw = (0..len)
        .map(|_| iv(r(c - rng.gen_range(0..=48), den), r(c + rng.gen_range(0..=48), den)))
        .collect();
    let tau = r(c * 4 + rng.gen_range(-160..=160), den * 4);
    (raw, tau)
}

fn monotonicity_and_soundness() -> (Verdict, Verdict) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let histories = 10_000;
    let mut revocations = 0;
    let mut forcing = 0;
    let mut samples = 0u64;
    let mut unsound = 0;
    for _ in 0..histories {
        let (raw, tau) = random_history(&mut rng);
        let seq = monotonize(&raw).unwrap();
        let mut first: Option<Status> = None;
        let mut last = Status::U;
        for stage in seq.stages() {
            let s = threshold_status_at_stage(stage, &tau);
            if let Some(f) = first {
                if s != f {
                    revocations += 1;
                }
            } else if s.is_categorical() {
                first = Some(s);
            }
            last = s;
        }
        if !last.is_categorical() {
            continue;
        }
        forcing += 1;
        let fin = seq.last().unwrap();
        let n = 1_000_000i64;
        for k in 0..1000 {
            let t = match k {
                0 => 0,
                1 => n,
                _ => rng.gen_range(0..=n),
            };
            let x = fin.lo().clone() + fin.width() * r(t, n);
            samples += 1;
            let ok = match last {
                Status::A => x >= tau,
                _ => x < tau,
            };
            if !ok {
                unsound += 1;
            }
        }
    }
    let mono = if revocations == 0 {
        Ok(format!("{histories} histories, 0 revocations"))
    } else {
        Err(format!("{revocations} revocations in {histories} histories"))
    };
    let sound = if unsound == 0 && forcing > 0 {
        Ok(format!("{forcing} forcing histories, {samples} samples, 0 violations"))
    } else {
        Err(format!(
            "{unsound} violations over {samples} samples ({forcing} forcing histories)"
        ))
    };
    (mono, sound)
}

// 5, 7, 8 -------------------------------------------------------------------

fn random_affine(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Layer {
    Layer::Affine {
        weights: (0..rows)
            .map(|_| (0..cols).map(|_| r(rng.gen_range(-8..=8), 4)).collect())
            .collect(),
        bias: (0..rows).map(|_| r(rng.gen_range(-4..=4), 4)).collect(),
    }
}

/// One to three hidden layers of one to four units, each followed by relu or
/// (when allowed) sigmoid, then an affine read-out.
fn random_network(rng: &mut ChaCha8Rng, outputs: usize, sigmoid: bool) -> NetworkModel {
    let inputs = rng.gen_range(1..=3);
    let mut layers = Vec::new();
    let mut prev = inputs;
    for _ in 0..rng.gen_range(1..=3) {
        let w = rng.gen_range(1..=4);
        layers.push(random_affine(rng, w, prev));
        layers.push(if sigmoid && rng.gen_bool(0.5) {
            Layer::Monotone {
                function_id: MonotoneFn::Sigmoid,
                precision_bits: 16,
            }
        } else {
            Layer::Relu
        });
        prev = w;
    }
    layers.push(random_affine(rng, outputs, prev));
    NetworkModel::new("random", inputs, layers).unwrap()
}

fn random_box(rng: &mut ChaCha8Rng, arity: usize) -> InputBox {
    InputBox::new(
        (0..arity)
            .map(|_| {
                let a = rng.gen_range(-16..=16i64);
                let b = rng.gen_range(-16..=16i64);
                iv(r(a.min(b), 16), r(a.max(b), 16))
            })
            .collect(),
    )
}

/// A regular grid of at least `min_points` points covering the box.
fn grid(b: &InputBox, min_points: usize) -> Vec<Vec<Rational>> {
    let n = b.arity() as u32;
    let mut per = 2usize;
    while per.pow(n) < min_points {
        per += 1;
    }
    let mut out = vec![vec![]];
    for d in &b.dims {
        let pts: Vec<Rational> = (0..per)
            .map(|k| d.lo().clone() + d.width() * r(k as i64, per as i64 - 1))
            .collect();
        out = out
            .into_iter()
            .flat_map(|p| {
                pts.iter().map(move |v| {
                    let mut p = p.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect();
    }
    out
}

fn stage_bounds(net: &NetworkModel, b: &InputBox, refinements: usize) -> Vec<EnclosureVector> {
    let mut s = RefinementState::init(net, b).unwrap();
    let mut out = vec![s.bounds()];
    for _ in 0..refinements {
        s = refine(&s, net, u64::MAX);
        out.push(s.bounds());
    }
    out
}

type Q = Ratio<i128>;

fn to_q(v: &Rational) -> Q {
    let n = i128::try_from(v.numer()).expect("numerator fits i128");
    let d = i128::try_from(v.denom()).expect("denominator fits i128");
    Q::new(n, d)
}

/// Outward enclosure of the true sigmoid on the grid `2^-40`; f64 error is
/// far below one grid step. Exact only at 0.
fn sigmoid_enclosure(v: &Q) -> (Q, Q) {
    if v.is_zero() {
        return (Q::new(1, 2), Q::new(1, 2));
    }
    let scale = 1i128 << 40;
    let s = 1.0 / (1.0 + (-(*v.numer() as f64 / *v.denom() as f64)).exp());
    let cell = (s * scale as f64).floor() as i128;
    let lo = Q::new((cell - 1).max(0), scale);
    let hi = Q::new((cell + 2).min(scale), scale);
    (lo, hi)
}

/// Independent forward pass: exact machine-integer rationals for affine and
/// relu, a floating-point enclosure for sigmoid.
fn oracle_point(net: &NetworkModel, x: &[Q]) -> Vec<(Q, Q)> {
    let mut vals: Vec<(Q, Q)> = x.iter().map(|v| (*v, *v)).collect();
    for layer in net.layers() {
        vals = match layer {
            Layer::Affine { weights, bias } => weights
                .iter()
                .zip(bias)
                .map(|(row, b)| {
                    let b = to_q(b);
                    row.iter().zip(&vals).fold((b, b), |(lo, hi), (w, (vl, vh))| {
                        let w = to_q(w);
                        if w < Q::zero() {
                            (lo + w * vh, hi + w * vl)
                        } else {
                            (lo + w * vl, hi + w * vh)
                        }
                    })
                })
                .collect(),
            Layer::Relu => vals
                .into_iter()
                .map(|(lo, hi)| (lo.max(Q::zero()), hi.max(Q::zero())))
                .collect(),
            Layer::Monotone {
                function_id: MonotoneFn::Sigmoid,
                ..
            } => vals
                .into_iter()
                .map(|(lo, hi)| (sigmoid_enclosure(&lo).0, sigmoid_enclosure(&hi).1))
                .collect(),
            Layer::Monotone { .. } => unreachable!("containment networks use relu and sigmoid only"),
        };
    }
    vals
}

fn q_grid(b: &InputBox, min_points: usize) -> Vec<Vec<Q>> {
    grid(b, min_points)
        .iter()
        .map(|x| x.iter().map(to_q).collect())
        .collect()
}

fn containment() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut points = 0;
    let mut checks = 0;
    for n in 0..100 {
        let outputs = rng.gen_range(1..=2);
        let net = random_network(&mut rng, outputs, true);
        let b = random_box(&mut rng, net.input_arity());
        let stages: Vec<Vec<(Q, Q)>> = stage_bounds(&net, &b, 6)
            .iter()
            .map(|st| st.dims.iter().map(|i| (to_q(i.lo()), to_q(i.hi()))).collect())
            .collect();
        for x in q_grid(&b, 10_000) {
            points += 1;
            let y = oracle_point(&net, &x);
            for (k, st) in stages.iter().enumerate() {
                checks += 1;
                let inside = y.iter().zip(st).all(|((lo, hi), (blo, bhi))| blo <= lo && hi <= bhi);
                ensure(inside, || {
                    format!("network {n} stage {k}: output {y:?} escapes {st:?} at {x:?}")
                })?;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "100 networks, {points} grid points, {checks} stage checks, 0 violations; {:.1} s",
        elapsed.as_secs_f64()
    ))
}

fn relu_table() -> Verdict {
    let cases = [
        (("-1", "2"), ("0", "2")),
        (("1", "3"), ("1", "3")),
        (("-3", "-1"), ("0", "0")),
    ];
    for ((a, b), (c, d)) in cases {
        let out = propagate_relu(&EnclosureVector::new(vec![iv(q(a), q(b))]));
        ensure(out.dims[0] == iv(q(c), q(d)), || {
            format!("[{a}, {b}] -> {:?}", out.dims[0])
        })?;
    }
    Ok("[-1,2]->[0,2], [1,3]->[1,3], [-3,-1]->[0,0]".into())
}

fn argmax_vs_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut counts = BTreeMap::new();
    let instances = 150;
    for n in 0..instances {
        let classes = rng.gen_range(2..=3);
        let net = random_network(&mut rng, classes, false);
        let b = random_box(&mut rng, net.input_arity());
        let cand = rng.gen_range(0..classes);
        let pred = Predicate::Argmax(ArgmaxPredicate {
            candidate_index: cand,
            classes,
            mode: ArgmaxMode::UniqueArgmax,
        });
        let d = budgeted_decide(&net, &b, &pred, 64, 16).unwrap();
        *counts.entry(d.status).or_insert(0) += 1;
        if !d.status.is_categorical() {
            continue;
        }
        for x in grid(&b, 2_000) {
            // Relu networks evaluate exactly, so each output is a point.
            let y: Vec<Rational> = evaluate_point(&net, &x)
                .unwrap()
                .into_iter()
                .map(|i| i.lo().clone())
                .collect();
            let strict_max_at_cand = (0..classes).filter(|j| *j != cand).all(|j| y[cand] > y[j]);
            let ok = match d.status {
                Status::A => strict_max_at_cand,
                _ => !strict_max_at_cand,
            };
            ensure(ok, || format!("instance {n}: {} contradicted at {x:?}", d.status))?;
        }
    }
    let c = |s| counts.get(&s).copied().unwrap_or(0);
    ensure(c(Status::A) > 0 && c(Status::D) > 0, || {
        format!("no categorical coverage: {counts:?}")
    })?;
    Ok(format!(
        "{instances} instances (A {}, D {}, U {}), 0 violations",
        c(Status::A),
        c(Status::D),
        c(Status::U)
    ))
}

fn linear_spec() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let instances = 100;
    for n in 0..instances {
        let outputs = rng.gen_range(1..=3);
        let net = random_network(&mut rng, outputs, true);
        let b = random_box(&mut rng, net.input_arity());
        let c: Vec<Rational> = (0..outputs).map(|_| r(rng.gen_range(-8..=8), 4)).collect();
        let d = r(rng.gen_range(-8..=8), 4);
        let stages = stage_bounds(&net, &b, 4);
        let pts = grid(&b, 1_000);
        // Largest certain value of c.y + d over the grid.
        let max = pts
            .iter()
            .map(|x| {
                let y = evaluate_point(&net, x).unwrap();
                c.iter()
                    .zip(&y)
                    .map(|(ci, yi)| yi.scale(ci).lo().clone())
                    .sum::<Rational>()
                    + d.clone()
            })
            .max()
            .unwrap();
        for (k, st) in stages.iter().enumerate() {
            let ub = bound_linear_spec(&c, &d, st).unwrap();
            ensure(ub >= max, || {
                format!("instance {n} stage {k}: UB {ub} < grid max {max}")
            })?;
        }
    }
    Ok(format!("{instances} instances x 5 stages, 0 violations"))
}

// 9 -------------------------------------------------------------------------

fn reseal(mut v: Value) -> Value {
    v["cert_hash"] = Value::String(hash_excluding(&v, "cert_hash").unwrap());
    v
}

type Mutation = (&'static str, Box<dyn Fn(&mut Value)>, bool, FailureCode);

fn tamper_suite() -> Verdict {
    use FailureCode::*;
    let report = scenario("tooth_social");
    let run = &report.runs[1];
    let s = Scenario::builtin("tooth_social").unwrap().unwrap();
    let ctx = CheckContext {
        store: &run.store,
        scope_policy: &s.policies.scope,
        standing_policy: &s.policies.standing,
    };
    let token = run.output.certificates()[0].clone();
    ensure(check_certificate(&run.contract, &token, ctx).accepted, || {
        "untampered token rejected".into()
    })?;
    let base = serde_json::to_value(&token).unwrap();

    let mutations: Vec<Mutation> = vec![
        (
            "cert_type",
            Box::new(|v| v["cert_type"] = json!("institutional")),
            true,
            ProvenanceFail,
        ),
        (
            "claim.status",
            Box::new(|v| v["claim"]["status"] = json!("D")),
            true,
            WitnessInvalid,
        ),
        (
            "claim.predicate.tau",
            Box::new(|v| v["claim"]["predicate"]["tau"] = json!("1/2")),
            true,
            WitnessInvalid,
        ),
        (
            "witness.interval.lo",
            Box::new(|v| v["witness"]["interval"]["lo"] = json!("13/20")),
            true,
            WitnessInvalid,
        ),
        (
            "witness.stage",
            Box::new(|v| v["witness"]["stage"] = json!(9)),
            true,
            WitnessInvalid,
        ),
        (
            "assumptions",
            Box::new(|v| v["assumptions"][0] = json!("activations: all")),
            true,
            WitnessInvalid,
        ),
        (
            "scope.jurisdiction",
            Box::new(|v| v["scope"]["jurisdiction"] = json!("CA")),
            true,
            ScopeMismatch,
        ),
        (
            "scope.time_window",
            Box::new(|v| v["scope"]["time_window"]["end"] = json!("2027-06-01T00:00:00Z")),
            true,
            ScopeMismatch,
        ),
        (
            "record_time",
            Box::new(|v| v["record_time"] = json!("2025-06-16T12:00:00Z")),
            true,
            ScopeMismatch,
        ),
        (
            "t_int.timestamp",
            Box::new(|v| v["t_int"]["timestamp"] = json!("2025-01-16T00:00:00Z")),
            true,
            ProvenanceFail,
        ),
        (
            "provenance.model_hash",
            Box::new(|v| v["provenance"]["model_hash"] = json!("0".repeat(64))),
            true,
            ProvenanceFail,
        ),
        (
            "provenance.config_hash",
            Box::new(|v| v["provenance"]["config_hash"] = json!("0".repeat(64))),
            true,
            ProvenanceFail,
        ),
        (
            "provenance.verifier_version",
            Box::new(|v| v["provenance"]["verifier_version"] = json!("gate-core/9.9.9")),
            true,
            ProvenanceFail,
        ),
        (
            "provenance.replay_seed",
            Box::new(|v| v["provenance"]["replay_seed"] = json!(1)),
            true,
            ProvenanceFail,
        ),
        (
            "provenance.record_item_hashes",
            Box::new(|v| {
                v["provenance"]["record_item_hashes"]
                    .as_array_mut()
                    .unwrap()
                    .push(json!("0".repeat(64)))
            }),
            true,
            ProvenanceFail,
        ),
        (
            "provenance.contract_hash",
            Box::new(|v| v["provenance"]["contract_hash"] = json!("0".repeat(64))),
            true,
            HashMismatch,
        ),
        (
            "cert_hash",
            Box::new(|v| v["cert_hash"] = json!("0".repeat(64))),
            false,
            HashMismatch,
        ),
        (
            "claim (unsealed edit)",
            Box::new(|v| v["claim"]["status"] = json!("D")),
            false,
            HashMismatch,
        ),
    ];
    let removals: Vec<Mutation> = gate_core::certificate::MANDATORY_FIELDS
        .iter()
        .map(|f| {
            let f = *f;
            (
                f,
                Box::new(move |v: &mut Value| drop(v.as_object_mut().unwrap().remove(f))) as Box<dyn Fn(&mut Value)>,
                false,
                FieldMissing,
            )
        })
        .collect();

    let mut n = 0;
    for (name, mutate, resealed, code) in mutations.iter().chain(removals.iter()) {
        let mut v = base.clone();
        mutate(&mut v);
        if *resealed {
            v = reseal(v);
        }
        let res = check_certificate_value(&run.contract, &v, ctx);
        ensure(!res.accepted && res.has(*code), || {
            format!("{name}: expected {code}, got {:?}", res.codes())
        })?;
        n += 1;
    }
    Ok(format!(
        "{n} mutations rejected with the matching code; untampered token accepted"
    ))
}

// 10 ------------------------------------------------------------------------

fn ts(s: &str) -> Timestamp {
    s.parse().unwrap()
}

fn toy_item(id: String, class: &str) -> RecordItem {
    RecordItem {
        content_hash: format!("{id}-content"),
        item_id: id.clone(),
        evidence_class: class.into(),
        timestamp: ts("2025-02-01T00:00:00Z"),
        provenance: ItemProvenance {
            source_id: "archive".into(),
            custody_chain: vec!["archive".into()],
            authenticated: true,
        },
    }
}

fn decider_construction() -> Verdict {
    // f = 1/5 + x0/5 + 3*x1/5 over press (saturating at 12) and inquiries (at 4).
    let net = NetworkModel::new(
        "sigma-toy",
        2,
        vec![Layer::Affine {
            weights: vec![vec![q("1/5"), q("3/5")]],
            bias: vec![q("1/5")],
        }],
    )
    .unwrap();
    let spec = FeatureSpec::new(&[("press_report", 12), ("inquiry_report", 4)]);
    let policies = PolicyBundle {
        scope: ScopePolicy {
            policy_id: "sigma".into(),
            jurisdictions: ["US".to_string()].into_iter().collect(),
            time_window: TimeWindow {
                start: ts("2025-01-01T00:00:00Z"),
                end: ts("2025-12-31T00:00:00Z"),
            },
            identity_rule_id: "named-official".into(),
        },
        standing: StandingPolicy {
            policy_id: "open".into(),
            required_classes: BTreeMap::new(),
            require_authenticated: true,
        },
    };
    let contract = DeploymentContract {
        scope_policy_id: "sigma".into(),
        regime: RegimeDescriptor::standard(&[], 32),
        t_int: ConfigRef {
            timestamp: ts("2025-01-01T00:00:00Z"),
            model_hash: net.model_hash().into(),
            verifier_version: VERIFIER_VERSION.into(),
            config_hash: spec.config_hash(),
        },
        budget: 16,
        n_max: 4,
        standing_policy_id: "open".into(),
        tau: q("7/10"),
        record_time: ts("2025-06-01T00:00:00Z"),
        input_radius: vec![q("1/20"), q("0")],
        contract_hash: String::new(),
    }
    .seal()
    .unwrap();
    let query = Query {
        query_id: "sigma-point".into(),
        query_meta: QueryMeta {
            jurisdiction: "US".into(),
            query_time: ts("2025-06-01T00:00:00Z"),
            identity_rule_id: "named-official".into(),
        },
        predicate: Predicate::threshold(0, q("7/10")),
        feature_spec: spec.clone(),
    };

    let margin = q("1/20");
    let mut sigma = Vec::new();
    for press in 0..=12 {
        for inquiry in 0..=4 {
            let mut store = RecordStore::new();
            (0..press).for_each(|k| store.append(toy_item(format!("p{k}"), "press_report")).unwrap());
            (0..inquiry).for_each(|k| store.append(toy_item(format!("i{k}"), "inquiry_report")).unwrap());
            let x = vec![r(press, 12), r(inquiry, 4)];
            let bx = gate_core::gate::input_box(&x, &contract.input_radius).unwrap();
            let b = RefinementState::init(&net, &bx).unwrap().bounds().dims[0].clone();
            if b.lo() >= &(contract.tau.clone() + margin.clone()) || b.hi() <= &(contract.tau.clone() - margin.clone())
            {
                sigma.push(store);
            }
        }
    }
    ensure(sigma.len() >= 50, || {
        format!("only {} points clear the margin", sigma.len())
    })?;
    sigma.truncate(50);

    let oracle = |qy: &Query, s: &RecordStore| evaluate_interface(&contract, &net, qy, s, &policies);
    let decider = derive_decider(oracle, &contract, &policies);
    let mut tally = BTreeMap::new();
    for store in &sigma {
        let d = decider
            .decide(&query, store)
            .map_err(|e| format!("decider not total: {e}"))?;
        // Independent re-verification from the serialized token.
        let token = CertificateToken::from_json(d.certificate.to_json().unwrap().as_bytes()).unwrap();
        let ctx = CheckContext {
            store,
            scope_policy: &policies.scope,
            standing_policy: &policies.standing,
        };
        ensure(check_certificate(&contract, &token, ctx).accepted, || {
            "certificate failed re-verification".into()
        })?;
        *tally.entry(d.status).or_insert(0) += 1;
    }

    let corrupted = |qy: &Query, s: &RecordStore| {
        let mut out = evaluate_interface(&contract, &net, qy, s, &policies)?;
        out.status = if out.status == Status::A { Status::D } else { Status::A };
        Ok(out)
    };
    let bad = derive_decider(corrupted, &contract, &policies);
    let caught = sigma
        .iter()
        .filter(|s| matches!(bad.decide(&query, s), Err(GateError::SoundnessViolation(_))))
        .count();
    ensure(caught == sigma.len(), || {
        format!("corrupted oracle caught on {caught}/{}", sigma.len())
    })?;
    Ok(format!(
        "50 points (A {}, D {}) decided and re-verified; corrupted oracle rejected on all 50",
        tally.get(&Status::A).unwrap_or(&0),
        tally.get(&Status::D).unwrap_or(&0)
    ))
}

// 11 ------------------------------------------------------------------------

fn truth_table() -> Verdict {
    let mut rows = Vec::new();
    for scope_fail in [false, true] {
        for standing_fail in [false, true] {
            for exhausted in [false, true] {
                let scope = if scope_fail {
                    ScopeOutcome::Fail(ScopeFailure::Jurisdiction)
                } else {
                    ScopeOutcome::Pass
                };
                let standing = if standing_fail {
                    StandingOutcome::Fail {
                        missing: [("press_report".to_string(), 1)].into_iter().collect(),
                    }
                } else {
                    StandingOutcome::Pass
                };
                let want = if scope_fail {
                    ReasonClass::Scope
                } else if standing_fail {
                    ReasonClass::Evidence
                } else if exhausted {
                    ReasonClass::Compute
                } else {
                    ReasonClass::Model
                };
                let got = classify_undetermined(&scope, &standing, exhausted);
                ensure(got == want, || {
                    format!("({scope_fail}, {standing_fail}, {exhausted}) -> {got}")
                })?;
                rows.push(got.to_string());
            }
        }
    }
    Ok(format!("8 combinations: {}", rows.join(" ")))
}

// 12 ------------------------------------------------------------------------

fn line_of(text: &[u8], pos: usize) -> u64 {
    text[..pos].iter().filter(|b| **b == b'\n').count() as u64
}

fn contest_replay() -> Verdict {
    let mut report = scenario("tooth_social");
    let s = Scenario::builtin("tooth_social").unwrap().unwrap();
    let run = report.runs[1].clone();
    let log = &mut report.history;
    let cert = run.output.certificates()[0].clone();

    // The store copy in which one press item's custody chain changed.
    let mut defective = RecordStore::new();
    let mut altered = false;
    for it in run.store.items() {
        let mut it = it.clone();
        if !altered && it.evidence_class == "press_report" {
            it.provenance.custody_chain.push("unlogged-transfer".into());
            altered = true;
        }
        defective.append(it).unwrap();
    }
    let ack = submit_challenge(
        log,
        Challenge {
            challenge_id: "custody-1".into(),
            challenger_role: "auditor".into(),
            target_cert_hash: cert.cert_hash.clone(),
            ground: Ground::ProvenanceDefect,
            submitted_at: ts("2025-07-01T00:00:00Z"),
            payload: vec![],
        },
    )
    .map_err(|e| e.to_string())?;
    let ctx = CheckContext {
        store: &defective,
        scope_policy: &s.policies.scope,
        standing_policy: &s.policies.standing,
    };
    let outcome = recheck(log, &run.contract, &ack.challenge_id, ctx).map_err(|e| e.to_string())?;
    ensure(outcome.upheld, || "custody challenge dismissed".into())?;
    let revised = revise_status(log, &run.query_id, &outcome).map_err(|e| e.to_string())?;
    ensure(revised.status == Status::U, || "revision is not U".into())?;

    let text = log.to_jsonl().unwrap().into_bytes();
    let entries = log.entries().len();
    ensure(replay_verify(&text) == ReplayResult::Valid, || {
        "pristine log invalid".into()
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mutations = 1_000;
    for _ in 0..mutations {
        let pos = rng.gen_range(0..text.len());
        let byte = loop {
            let b: u8 = rng.gen();
            if b != text[pos] {
                break b;
            }
        };
        let mut bad = text.clone();
        bad[pos] = byte;
        let want = line_of(&text, pos);
        match replay_verify(&bad) {
            ReplayResult::Invalid { seq, .. } if seq == want => {}
            other => {
                return Err(format!(
                    "byte {pos} -> {byte:#04x}: expected invalid at {want}, got {other}"
                ))
            }
        }
    }
    let lines: Vec<&[u8]> = text.split(|b| *b == b'\n').filter(|l| !l.is_empty()).collect();
    // Deleting the last entry leaves a valid shorter chain; interior deletions only.
    for k in 0..entries - 1 {
        let mut bad = Vec::new();
        for (i, l) in lines.iter().enumerate() {
            if i != k {
                bad.extend_from_slice(l);
                bad.push(b'\n');
            }
        }
        match replay_verify(&bad) {
            ReplayResult::Invalid { seq, .. } if seq == k as u64 => {}
            other => return Err(format!("deleting entry {k}: got {other}")),
        }
    }
    Ok(format!(
        "{entries}-entry log valid; {mutations} byte mutations and {} interior deletions caught at the right seq",
        entries - 1
    ))
}

// 13 ------------------------------------------------------------------------

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn determinism() -> Verdict {
    let mut files = 0;
    for name in ["tooth_social", "tooth_social_exoneration"] {
        let runs: Vec<(BTreeMap<String, Vec<u8>>, String)> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                let out = gate_cli::run(["gate", "scenario", name, "--out", dir.path().to_str().unwrap()]);
                assert_eq!(out.code, 0, "{}", out.stderr);
                (snapshot(dir.path()), out.stdout)
            })
            .collect();
        ensure(runs[0] == runs[1], || format!("{name}: runs differ"))?;
        let names = runs[0].0.keys().collect::<Vec<_>>();
        for kind in ["verdict.json", "cert.json", "history.log.jsonl"] {
            ensure(names.iter().any(|n| n.ends_with(kind)), || {
                format!("{name}: no {kind} written")
            })?;
        }
        files += runs[0].0.len();
    }
    Ok(format!("{files} files byte-identical across two runs of each scenario"))
}

fn main() -> ExitCode {
    let (mono, sound) = monotonicity_and_soundness();
    let mut results: Vec<(u32, &str, Verdict)> = vec![
        (1, "case-study golden run", golden_run()),
        (2, "boundary convention", boundary_convention()),
        (3, "monotonicity", mono),
        (4, "soundness", sound),
        (5, "propagation containment", containment()),
        (6, "relu rule table", relu_table()),
        (7, "argmax forcing vs oracle", argmax_vs_oracle()),
        (8, "linear-spec over-approximation", linear_spec()),
        (9, "certificate tamper suite", tamper_suite()),
        (10, "decider on a forced scope", decider_construction()),
        (11, "reason-class truth table", truth_table()),
        (12, "contestability replay", contest_replay()),
        (13, "determinism", determinism()),
    ];
    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (id, name, v) in &results {
        match v {
            Ok(detail) => println!("PASS {id:>2} {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {id:>2} {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
