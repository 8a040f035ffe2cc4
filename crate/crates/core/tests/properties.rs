//! Long-run and randomized invariants of the GRU cell and the quantizer.

use fxq::graph::{serialize, ModelMeta};
use fxq::kernels::{gru_step, GruSpec};
use fxq::quantizer::{quantize_model, select_format, QuantPolicy};
use fxq::synth::{random_model, tiny_architecture};
use fxq::{QBlob, QFormat, QTensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn blob(rng: &mut ChaCha8Rng, fmt: QFormat, n: usize) -> QBlob {
    QBlob::new(fmt, (0..n).map(|_| rng.random_range(-128..128)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    /// The state is a convex mix of the previous state and a tanh output, so
    /// it stays within one unit and never reaches the Q2.13 clip bounds.
    #[test]
    fn gru_state_never_saturates(seed in any::<u64>(), m in 1usize..=16, h in 1usize..=16, wf in 3u8..=7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = QFormat::with_frac(8, wf).unwrap();
        let input = QFormat::Q2_5;
        let spec = GruSpec::new(
            m,
            h,
            blob(&mut rng, w, 3 * m * h),
            blob(&mut rng, w, 3 * h * h),
            blob(&mut rng, w, 3 * h),
            input,
            QFormat::Q2_13,
            QFormat::Q2_13,
            QFormat::Q2_5,
        )
        .unwrap();
        let mut state = spec.zero_state();
        let one = 1i64 << QFormat::Q2_13.frac_bits();
        for step in 0..10_000 {
            let x: Vec<i16> = (0..m).map(|_| rng.random_range(-128..128)).collect();
            state = gru_step(&state, &QTensor::vector(x, input).unwrap(), &spec).unwrap();
            for &r in state.data() {
                let r = r as i64;
                prop_assert!(r > QFormat::Q2_13.raw_min() && r < QFormat::Q2_13.raw_max(), "step {step}: raw {r}");
                prop_assert!(r.abs() <= one + 2, "step {step}: |h| above one ({r})");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 500, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn halving_never_adds_integer_bits(v in prop::collection::vec(-200.0f64..200.0, 1..64), bits in 2u8..=16) {
        let half: Vec<f64> = v.iter().map(|x| x * 0.5).collect();
        let a = select_format(&v, bits).unwrap();
        let b = select_format(&half, bits).unwrap();
        prop_assert!(b.int_bits() <= a.int_bits(), "{a} then {b}");
    }
}

#[test]
fn quantization_is_deterministic() {
    let meta = ModelMeta { window_len: 64, ..ModelMeta::default() };
    for seed in 0..20 {
        let model = random_model(meta.clone(), &tiny_architecture(), seed, 1.0);
        let (a, sa) = quantize_model(&model, &QuantPolicy::default(), None).unwrap();
        let (b, sb) = quantize_model(&model, &QuantPolicy::default(), None).unwrap();
        assert_eq!(serialize(&a).unwrap(), serialize(&b).unwrap());
        assert_eq!(sa, sb);
    }
}
