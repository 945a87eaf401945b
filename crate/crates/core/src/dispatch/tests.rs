use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::domain::{
    GeoPoint, Label, LocationClassId, PlaceId, Question, QuestionId, TaskContext, TaskId, WorkerLocation,
};
use crate::world::{MobilitySchedule, Strategy as Behaviour};

const TT: TaskTypeId = TaskTypeId(0);
const TRANSPORT: LocationClassId = LocationClassId(5);
const SCHOOL: LocationClassId = LocationClassId(3);

fn center() -> GeoPoint {
    GeoPoint::new(52.0, 21.0).unwrap()
}

fn worker(id: u32, point: GeoPoint, class: LocationClassId, skill: f64) -> Worker {
    let mut w = Worker::new(
        WorkerId(id),
        WorkerLocation { point, class },
        MobilitySchedule::stationary(PlaceId(0), 86_400.0).unwrap(),
        0.8,
        Behaviour::Honest,
    );
    w.profile.skill.insert(TT, skill);
    w
}

fn task(kind: TaskKind, radius_m: f64, n_questions: u32) -> Task {
    Task {
        id: TaskId(7),
        kind,
        task_type: TT,
        context: TaskContext { center: center(), radius_m, admissible: BTreeSet::from([TRANSPORT]) },
        questions: (0..n_questions)
            .map(|i| Question {
                id: QuestionId(i),
                candidates: vec![Label(0), Label(1)],
                multi_label: false,
                ground_truth: BTreeSet::from([Label(0)]),
            })
            .collect(),
        payload_bytes: 100,
        created_at: 0.0,
    }
}

#[test]
fn perfect_match_has_zero_distance() {
    let w = worker(1, center(), TRANSPORT, 1.0);
    assert_eq!(context_distance(&w, &task(TaskKind::Normal, 1000.0, 1), &ContextWeights::default()), 0.0);
}

#[test]
fn worst_match_sums_the_weights() {
    let edge = center().offset(1000.0, 0.0);
    let t = task(TaskKind::Normal, haversine_distance(edge, center()), 1);
    let w = worker(1, edge, SCHOOL, 0.0);
    assert_eq!(context_distance(&w, &t, &ContextWeights::new(1.0, 1.0, 1.0).unwrap()), 3.0);
    // Beyond the radius the geo term saturates.
    let far = worker(2, center().offset(9000.0, 0.0), SCHOOL, 0.0);
    assert_eq!(context_distance(&far, &t, &ContextWeights::new(1.0, 1.0, 1.0).unwrap()), 3.0);
}

#[test]
fn skill_only_weighting() {
    let w = worker(1, center().offset(500.0, 0.0), SCHOOL, 0.8);
    let d = context_distance(&w, &task(TaskKind::Normal, 1000.0, 1), &ContextWeights::new(0.0, 0.0, 1.0).unwrap());
    assert!((d - 0.2).abs() < 1e-12);
}

#[test]
fn weights_must_be_valid() {
    assert_eq!(ContextWeights::new(0.0, 0.0, 0.0), Err(DispatchError::Weights));
    assert_eq!(ContextWeights::new(-1.0, 1.0, 1.0), Err(DispatchError::Weights));
}

#[test]
fn ranking_basics() {
    let t = task(TaskKind::Normal, 1000.0, 1);
    let w = ContextWeights::new(0.0, 0.0, 1.0).unwrap();
    let one = [worker(4, center(), TRANSPORT, 0.3)];
    assert_eq!(rank_candidates(&t, &one, &w, 5, None).unwrap(), vec![WorkerId(4)]);
    let two = [worker(1, center(), TRANSPORT, 0.3), worker(2, center(), TRANSPORT, 0.8)];
    assert_eq!(rank_candidates(&t, &two, &w, 5, None).unwrap(), vec![WorkerId(2), WorkerId(1)]);
    let tied = [worker(9, center(), TRANSPORT, 0.5), worker(3, center(), TRANSPORT, 0.5)];
    assert_eq!(rank_candidates(&t, &tied, &w, 5, None).unwrap(), vec![WorkerId(3), WorkerId(9)]);
    assert_eq!(rank_candidates(&t, &[], &w, 5, None), Err(DispatchError::NoWorkers));
}

#[test]
fn prior_pushes_inefficient_classes_down() {
    let t = task(TaskKind::Normal, 1000.0, 1);
    let w = ContextWeights::new(0.0, 0.0, 1.0).unwrap();
    let ws = [worker(1, center(), SCHOOL, 0.9), worker(2, center(), TRANSPORT, 0.6)];
    let prior = RankingPrior { weight: 1.0, inefficient: BTreeSet::from([(SCHOOL, TT)]) };
    assert_eq!(rank_candidates(&t, &ws, &w, 2, None).unwrap(), vec![WorkerId(1), WorkerId(2)]);
    assert_eq!(rank_candidates(&t, &ws, &w, 2, Some(&prior)).unwrap(), vec![WorkerId(2), WorkerId(1)]);
}

fn random_workers(spec: &[(f64, f64, bool, f64)]) -> Vec<Worker> {
    spec.iter()
        .enumerate()
        .map(|(i, &(dn, de, admissible, skill))| {
            let class = if admissible { TRANSPORT } else { SCHOOL };
            worker(i as u32, center().offset(dn, de), class, skill)
        })
        .collect()
}

fn worker_spec() -> impl Strategy<Value = Vec<(f64, f64, bool, f64)>> {
    // Skills on a coarse grid so exact ties actually occur.
    prop::collection::vec(
        (-3000.0f64..3000.0, -3000.0f64..3000.0, any::<bool>(), (0u8..=4).prop_map(|s| s as f64 / 4.0)),
        1..25,
    )
}

proptest! {
    #[test]
    fn ranking_matches_full_sort_oracle(spec in worker_spec(), limit in 1usize..30, wg in 0.0f64..2.0, wc in 0.0f64..2.0, ws in 0.01f64..2.0) {
        let ws_ = random_workers(&spec);
        let t = task(TaskKind::Normal, 2000.0, 1);
        let w = ContextWeights::new(wg, wc, ws).unwrap();
        let got = rank_candidates(&t, &ws_, &w, limit, None).unwrap();

        let mut oracle: Vec<(f64, u32)> = ws_.iter().map(|wk| (context_distance(wk, &t, &w), wk.id.0)).collect();
        oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected: Vec<WorkerId> = oracle.iter().take(limit).map(|&(_, id)| WorkerId(id)).collect();
        prop_assert_eq!(&got, &expected);

        // Prefix of a permutation, never an inversion.
        let distinct: BTreeSet<WorkerId> = got.iter().copied().collect();
        prop_assert_eq!(distinct.len(), got.len());
        for pair in got.windows(2) {
            let a = context_distance(&ws_[pair[0].0 as usize], &t, &w);
            let b = context_distance(&ws_[pair[1].0 as usize], &t, &w);
            prop_assert!(a < b || (a == b && pair[0] < pair[1]));
        }
    }

    #[test]
    fn ranking_is_invariant_to_weight_scale(spec in worker_spec(), k in -4i32..5) {
        let ws_ = random_workers(&spec);
        let t = task(TaskKind::Normal, 2000.0, 1);
        let w = ContextWeights::new(0.7, 1.3, 0.9).unwrap();
        let c = libm::exp2(k as f64);
        let a = rank_candidates(&t, &ws_, &w, ws_.len(), None).unwrap();
        let b = rank_candidates(&t, &ws_, &w.scaled(c), ws_.len(), None).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn emergency_targets_exactly_the_geofence(spec in worker_spec(), radius in 100.0f64..4000.0, seed in any::<u64>()) {
        let ws_ = random_workers(&spec);
        let t = task(TaskKind::Emergency, radius, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = emergency_broadcast(&t, &ws_, &NetworkModel::perfect(), 0.0, &mut rng).unwrap();
        let oracle: BTreeSet<WorkerId> = ws_
            .iter()
            .filter(|w| haversine_distance(w.location.point, center()) <= radius)
            .map(|w| w.id)
            .collect();
        prop_assert_eq!(d.targeted_workers(), oracle.clone());
        prop_assert_eq!(d.assignments.len(), oracle.len() * 2);
    }

    #[test]
    fn delivery_outcomes_are_conserved(
        n in 1usize..40,
        k in 1usize..10,
        av in 0.0f64..=1.0,
        fail in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let ws_: Vec<Worker> = (0..n).map(|i| worker(i as u32, center(), TRANSPORT, 0.5)).collect();
        let refs: Vec<&Worker> = ws_.iter().collect();
        let net = NetworkModel { availability_prob: av, delivery_failure_prob: fail, per_message_overhead_bytes: 10, latency_s: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = dispatch_task(&task(TaskKind::Normal, 1000.0, 3), &refs, &DispatchPolicy::Random, None, &net, k, 0.0, &mut rng).unwrap();
        let m = network_metrics(&d.events).unwrap();
        prop_assert_eq!(m.delivered + m.failed + m.unreachable, m.attempted);
        prop_assert_eq!(m.attempted as usize, k.min(n) * 3);
        prop_assert!((m.fail_r - (m.failed + m.unreachable) as f64 / m.attempted as f64).abs() < 1e-15);
    }
}

fn crowd(n: usize) -> Vec<Worker> {
    (0..n).map(|i| worker(i as u32, center(), TRANSPORT, 0.5)).collect()
}

#[test]
fn perfect_network_delivers_everything() {
    let ws = crowd(20);
    let refs: Vec<&Worker> = ws.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d = dispatch_task(
        &task(TaskKind::Normal, 1000.0, 2),
        &refs,
        &DispatchPolicy::default(),
        None,
        &NetworkModel::perfect(),
        5,
        3.0,
        &mut rng,
    )
    .unwrap();
    assert_eq!(d.assignments.len(), 10);
    assert!(d.assignments.iter().all(|a| a.delivered() && a.payload_bytes == 100 && a.dispatched_at == 3.0));
    let m = network_metrics(&d.events).unwrap();
    assert_eq!((m.av, m.fail_r, m.tu), (1.0, 0.0, 100.0));
}

#[test]
fn certain_failure_delivers_nothing() {
    let ws = crowd(20);
    let refs: Vec<&Worker> = ws.iter().collect();
    let net = NetworkModel { delivery_failure_prob: 1.0, ..NetworkModel::perfect() };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d =
        dispatch_task(&task(TaskKind::Normal, 1000.0, 1), &refs, &DispatchPolicy::Random, None, &net, 5, 0.0, &mut rng)
            .unwrap();
    assert!(d.assignments.iter().all(|a| !a.delivered()));
    assert_eq!(network_metrics(&d.events).unwrap().fail_r, 1.0);
}

#[test]
fn lossy_network_matches_its_parameters() {
    let ws = crowd(1000);
    let refs: Vec<&Worker> = ws.iter().collect();
    let net = NetworkModel { availability_prob: 0.8, delivery_failure_prob: 0.1, ..NetworkModel::perfect() };
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let d = dispatch_task(
        &task(TaskKind::Normal, 1000.0, 1),
        &refs,
        &DispatchPolicy::Random,
        None,
        &net,
        1000,
        0.0,
        &mut rng,
    )
    .unwrap();
    let m = network_metrics(&d.events).unwrap();
    assert_eq!(m.attempted, 1000);
    assert!((m.av - 0.8).abs() <= 0.03, "av {}", m.av);
    // Transit failures among reachable workers.
    let transit = m.failed as f64 / m.reachable as f64;
    assert!((transit - 0.1).abs() <= 0.03, "transit {}", transit);
}

#[test]
fn dispatch_errors() {
    let ws = crowd(3);
    let refs: Vec<&Worker> = ws.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = task(TaskKind::Normal, 1000.0, 1);
    let net = NetworkModel::perfect();
    assert_eq!(
        dispatch_task(&t, &refs, &DispatchPolicy::Random, None, &net, 0, 0.0, &mut rng),
        Err(DispatchError::Fanout)
    );
    assert_eq!(
        dispatch_task(&t, &[], &DispatchPolicy::Random, None, &net, 1, 0.0, &mut rng),
        Err(DispatchError::NoWorkers)
    );
    assert_eq!(emergency_broadcast(&t, &ws, &net, 0.0, &mut rng), Err(DispatchError::NotEmergency(TaskId(7))));
    let bad = NetworkModel { availability_prob: 1.5, ..net };
    assert_eq!(
        dispatch_task(&t, &refs, &DispatchPolicy::Random, None, &bad, 1, 0.0, &mut rng),
        Err(DispatchError::Network)
    );
}

#[test]
fn emergency_edge_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let far: Vec<Worker> = (0..5).map(|i| worker(i, center().offset(10_000.0, 0.0), TRANSPORT, 0.5)).collect();
    let t = task(TaskKind::Emergency, 500.0, 1);
    assert!(emergency_broadcast(&t, &far, &NetworkModel::perfect(), 0.0, &mut rng).unwrap().assignments.is_empty());
    let near = crowd(6);
    let d = emergency_broadcast(&t, &near, &NetworkModel::perfect(), 0.0, &mut rng).unwrap();
    assert_eq!(d.assignments.len(), 6);
    assert!(d.assignments.iter().all(Assignment::delivered));
}

fn ev(outcome: DeliveryOutcome, bytes: u64) -> DeliveryEvent {
    DeliveryEvent { task: TaskId(0), question: QuestionId(0), worker: WorkerId(0), outcome, bytes, timestamp: 0.0 }
}

#[test]
fn metric_examples() {
    use DeliveryOutcome::*;
    let all = vec![ev(Delivered, 100); 4];
    let m = network_metrics(&all).unwrap();
    assert_eq!((m.av, m.fail_r, m.tu), (1.0, 0.0, 100.0));

    let mut five = vec![ev(Delivered, 100); 4];
    five.push(ev(Failed, 100));
    assert_eq!(network_metrics(&five).unwrap().fail_r, 0.2);

    let mut ten = vec![ev(Unreachable, 100); 2];
    ten.push(ev(Failed, 100));
    ten.extend(vec![ev(Delivered, 100); 7]);
    let m = network_metrics(&ten).unwrap();
    assert_eq!(m.av, 0.8);
    assert_eq!(m.fail_r, 0.3);
    assert_eq!(m.reachable, 8);

    assert_eq!(network_metrics(&[]), Err(DispatchError::NoEvents));
}
