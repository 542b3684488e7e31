mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vqaug::consistency::{evaluate, EvalOptions, MissingPolicy};
use vqaug::metrics::MetricsReport;
use vqaug::{Exact, ExactMetricsReport, FloatEvaluationReport, FloatMetricsReport, Scalar};

#[test]
fn float_and_exact_instantiations_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let ds = common::random_dataset(&mut rng, 20, 10);
        let exact = ExactMetricsReport::compute(&ds).unwrap();
        let float = FloatMetricsReport::compute(&ds).unwrap();
        let single = MetricsReport::<f32>::compute(&ds).unwrap();
        for (e, f, s) in [(&exact.anqi, float.anqi, single.anqi), (&exact.anqa, float.anqa, single.anqa), (&exact.anqs, float.anqs, single.anqs)] {
            assert!((Scalar::to_f64(e) - f).abs() < 1e-12);
            assert!((Scalar::to_f64(e) - s as f64).abs() < 1e-5);
            assert_eq!(e.rounded(2), f.rounded(2));
        }

        let preds = common::random_predictions(&mut rng, &ds, 0.1);
        let opts = EvalOptions { missing_policy: MissingPolicy::CountIncorrect, ..Default::default() };
        let e = evaluate::<Exact>(&ds, &preds, opts).unwrap();
        let f: FloatEvaluationReport = evaluate(&ds, &preds, opts).unwrap();
        assert_eq!(e.histogram, f.histogram);
        match (e.tar_sc, f.tar_sc) {
            (Some(x), Some(y)) => assert!((Scalar::to_f64(&x) - y).abs() < 1e-12),
            (None, None) => {}
            other => panic!("{other:?}"),
        }
    }
}
