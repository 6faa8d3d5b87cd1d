use num_complex::Complex;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mmwave_beam::allocation::{allocate_naive, allocate_qc, QosThresholds};
use mmwave_beam::channel::{gen_channel, leakage_correlation, make_codebook, ChannelSpec};
use mmwave_beam::linalg::ComplexMatrix;
use mmwave_beam::metrics::user_rate;
use mmwave_beam::precoding::{assemble_analog, normalize_columns};
use mmwave_beam::training::{cross_region, is_training, Codebooks, MeasurementMatrix, NoiseModel, SpInit, SpState};

fn measurement(user: usize, rows: usize, cols: usize, vals: &[f64]) -> MeasurementMatrix<f64> {
    let m = ComplexMatrix::from_fn(rows, cols, |i, j| Complex::new(vals[(i * cols + j) % vals.len()], 0.0));
    MeasurementMatrix::from_values(user, m)
}

fn instance() -> impl Strategy<Value = (usize, usize, usize, Vec<f64>, f64)> {
    (1usize..=4, 1usize..=4, 2usize..=8)
        .prop_flat_map(|(k, n_ue, n_bs)| {
            (
                Just(k),
                Just(n_ue),
                Just(n_bs),
                prop::collection::vec(0.0f64..10.0, k * n_ue * n_bs),
                0.0f64..8.0,
            )
        })
}

fn build(k: usize, n_ue: usize, n_bs: usize, vals: &[f64]) -> Vec<MeasurementMatrix<f64>> {
    (0..k)
        .map(|u| measurement(u, n_ue, n_bs, &vals[u * n_ue * n_bs..(u + 1) * n_ue * n_bs]))
        .collect()
}

proptest! {
    #[test]
    fn qc_is_conflict_free_and_qos_valid((k, n_ue, n_bs, vals, gamma) in instance()) {
        let r = build(k, n_ue, n_bs, &vals);
        let th = QosThresholds::uniform(k, gamma).unwrap();
        let a = allocate_qc(&r, &th).unwrap();
        prop_assert!(a.is_conflict_free());
        for (u, p) in a.pairs().iter().enumerate() {
            if let Some(p) = p {
                prop_assert!(r[u].values()[(p.ue, p.bs)].norm() >= gamma);
            }
        }
        prop_assert_eq!(a.qos_satisfied(&r, &th), a.served_count());
    }

    #[test]
    fn qc_is_scale_invariant((k, n_ue, n_bs, vals, gamma) in instance(), scale in 0.01f64..100.0) {
        let r = build(k, n_ue, n_bs, &vals);
        // powers of two keep the comparisons exact
        let s = 2f64.powi(scale.log2().round() as i32);
        let scaled: Vec<f64> = vals.iter().map(|v| v * s).collect();
        let a = allocate_qc(&r, &QosThresholds::uniform(k, gamma).unwrap()).unwrap();
        let b = allocate_qc(&build(k, n_ue, n_bs, &scaled), &QosThresholds::uniform(k, gamma * s).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn qc_keeps_distinct_argmax((k, n_ue, n_bs, vals, _g) in instance()) {
        let r = build(k, n_ue, n_bs, &vals);
        let naive = allocate_naive(&r).unwrap();
        if naive.is_conflict_free() {
            let min_best = naive
                .pairs()
                .iter()
                .enumerate()
                .map(|(u, p)| r[u].values()[(p.unwrap().ue, p.unwrap().bs)].norm())
                .fold(f64::INFINITY, f64::min);
            let a = allocate_qc(&r, &QosThresholds::uniform(k, min_best).unwrap()).unwrap();
            prop_assert_eq!(a, naive);
        }
    }

    #[test]
    fn cross_cells_in_bounds(n_ue in 2usize..20, n_bs in 2usize..70, p in 0usize..19, q in 0usize..69) {
        prop_assume!(p + 1 < n_ue && q + 1 < n_bs);
        let c = cross_region(p, q, n_ue, n_bs).unwrap();
        prop_assert!(c.len() <= 12 && c.len() >= 6);
        for &(i, j) in c.cells() {
            prop_assert!(i < n_ue && j < n_bs);
        }
        let interior = p >= 1 && p + 2 < n_ue && q >= 1 && q + 2 < n_bs;
        prop_assert_eq!(c.len() == 12, interior);
    }

    #[test]
    fn sp_probabilities_stay_normalized(seed in any::<u64>(), draws in 1usize..32) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut st = SpState::new(SpInit::Uniform, 16, 64);
        for _ in 0..draws {
            let Some((ue, cols)) = st.draw(16, &mut rng).unwrap() else { break };
            prop_assert_eq!(cols.len(), 16);
            st.update(ue, &cols).unwrap();
            let total: f64 = st.probs().iter().sum();
            prop_assert!(st.exhausted() || (total - 1.0).abs() < 1e-12);
            prop_assert!(st.probs().iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn is_tested_entries_are_exact_without_noise(seed in any::<u64>(), t in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let books = Codebooks::<f64>::for_arrays(8, 16).unwrap();
        let ch = gen_channel(&ChannelSpec::default(), 8, 16, &mut rng).unwrap();
        let v = books.virtual_channel(ch.matrix()).unwrap();
        let out = is_training(&[ch.matrix()], &books, &NoiseModel::noiseless(1), 4, t, &mut rng).unwrap();
        let m = &out.measurements[0];
        prop_assert!(m.additional_tests() <= 6 * t);
        for i in 0..8 {
            for j in 0..16 {
                if m.is_tested(i, j) {
                    prop_assert_eq!(m.values()[(i, j)], v[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn normalized_columns_have_unit_transmit_norm(seed in any::<u64>(), k in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let books = Codebooks::<f64>::for_arrays(4, 16).unwrap();
        let bs = rand::seq::index::sample(&mut rng, 16, k).into_vec();
        let alloc = mmwave_beam::allocation::Allocation::from_pairs(
            bs.iter().map(|&b| Some(mmwave_beam::allocation::BeamPair { ue: 0, bs: b })).collect(),
        );
        let p = assemble_analog(&alloc, &books).unwrap();
        let raw = ComplexMatrix::from_fn(k, k, |_, _| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let f = normalize_columns(&p.f_rf, &raw).unwrap();
        let tx = p.f_rf.matmul(&f).unwrap();
        for s in 0..k {
            let n: f64 = tx.column(s).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn rate_monotone_in_signal_and_interference(seed in any::<u64>(), boost in 1.0f64..3.0) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let books = Codebooks::<f64>::for_arrays(1, 4).unwrap();
        let alloc = mmwave_beam::allocation::Allocation::from_pairs(vec![
            Some(mmwave_beam::allocation::BeamPair { ue: 0, bs: 0 }),
            Some(mmwave_beam::allocation::BeamPair { ue: 0, bs: 1 }),
        ]);
        let mut p = assemble_analog(&alloc, &books).unwrap();
        p.f_bb = ComplexMatrix::identity(2);
        let f0: Vec<_> = p.f_rf.column(0);
        let f1: Vec<_> = p.f_rf.column(1);
        let a = rng.random_range(0.1..2.0);
        let b = rng.random_range(0.0..2.0);
        // channel row hitting beam 0 with amplitude a and beam 1 with b
        let h = |a: f64, b: f64| {
            ComplexMatrix::from_fn(1, 4, |_, n| f0[n].conj() * a + f1[n].conj() * b)
        };
        let base = h(a, b);
        let other = h(0.0, 1.0);
        let r0 = user_rate(0, &[&base, &other], &p, 2.0, 1.0).unwrap();
        let more_signal = h(a * boost, b);
        let more_interf = h(a, b * boost + 0.1);
        prop_assert!(user_rate(0, &[&more_signal, &other], &p, 2.0, 1.0).unwrap() >= r0 - 1e-12);
        prop_assert!(user_rate(0, &[&more_interf, &other], &p, 2.0, 1.0).unwrap() <= r0 + 1e-12);
    }
}

#[test]
fn single_precision_pipeline() {
    let books = Codebooks::<f32>::for_arrays(4, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ch = gen_channel::<f32, _>(&ChannelSpec::default(), 4, 8, &mut rng).unwrap();
    let out = is_training(&[ch.matrix()], &books, &NoiseModel::noiseless(1), 4, 1, &mut rng).unwrap();
    let a = allocate_qc(&out.measurements, &QosThresholds::uniform(1, 0.0f32).unwrap()).unwrap();
    assert_eq!(a.served_count(), 1);
    let c = make_codebook::<f32>(8).unwrap();
    assert_eq!(c.len(), 8);
    let w = leakage_correlation::<f32>(64, 0.0, 0).unwrap();
    assert!(w.is_finite());
}
