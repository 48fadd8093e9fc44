use std::collections::BTreeMap;

use proptest::prelude::*;

use topofield::metrics::{
    evaluate_batch, mae, mse, re_c, re_vf, ComplianceMode, EvalOptions, GroundTruth, MetricsError,
};
use topofield::model::{enumerate_bc_scenarios, DensityField, DesignDomain, Grid, ProblemSpec};

const EMIN: f64 = 1e-9;

fn domain() -> DesignDomain {
    DesignDomain::with_size(12, 6)
}

/// Left edge clamped, horizontal unit load at the middle of the right edge.
/// Symmetric about the horizontal midline.
fn symmetric_spec(d: &DesignDomain) -> ProblemSpec {
    let scenario = enumerate_bc_scenarios().swap_remove(0);
    assert_eq!(scenario.mirrored_vertically(), scenario);
    ProblemSpec::new(0.40, scenario, d.node_index(d.nelx, d.nely / 2), 0, d).unwrap()
}

fn field(g: Grid<f64>) -> DensityField {
    DensityField::new(g).unwrap()
}

fn modulus(y: f64, p: f64) -> f64 {
    EMIN + y.powf(p) * (1.0 - EMIN)
}

#[test]
fn pixel_errors_by_hand() {
    // top half solid, bottom half void, and its mirror image
    let y = Grid::from_fn(4, 6, |r, _| if r < 2 { 1.0 } else { 0.0 });
    let flipped = y.flip_rows();
    assert_eq!(mae(&y, &flipped).unwrap(), 1.0);
    assert_eq!(mse(&y, &flipped).unwrap(), 1.0);
    assert_eq!(re_vf(&y, &flipped).unwrap(), 0.0);

    // one cell off by 0.5 and one by -0.25 on a 4x6 grid of 0.5
    let a = Grid::filled(4, 6, 0.5);
    let mut b = a.clone();
    b[(0, 0)] = 1.0;
    b[(3, 5)] = 0.25;
    assert!((mae(&a, &b).unwrap() - 0.75 / 24.0).abs() < 1e-15);
    assert!((mse(&a, &b).unwrap() - 0.3125 / 24.0).abs() < 1e-15);
    assert!((re_vf(&a, &b).unwrap() - 0.25 / 12.0).abs() < 1e-15);
}

#[test]
fn uniform_scaling_gives_closed_form_compliance_error() {
    // A uniform design scales the whole stiffness matrix, so the compliance
    // ratio is the inverse modulus ratio.
    let d = domain();
    let spec = symmetric_spec(&d);
    for (a, b, p) in [(0.8, 0.4, 2.0), (1.0, 0.5, 2.0), (0.5, 0.6, 3.0)] {
        let y = DensityField::uniform(&d, a).unwrap();
        let yhat = DensityField::uniform(&d, b).unwrap();
        let got = re_c(&y, &yhat, &spec, &d, p, ComplianceMode::Grayscale).unwrap();
        let expect = modulus(a, p) / modulus(b, p) - 1.0;
        assert!((got - expect).abs() < 1e-12, "{a} {b} {p}: {got} vs {expect}");
    }
    // halving a solid design at p = 2 gives four times the compliance
    let y = DensityField::uniform(&d, 1.0).unwrap();
    let half = DensityField::uniform(&d, 0.5).unwrap();
    let got = re_c(&y, &half, &spec, &d, 2.0, ComplianceMode::Grayscale).unwrap();
    assert!((got - 3.0).abs() < 1e-7);
}

#[test]
fn mirrored_design_has_equal_compliance_on_symmetric_problem() {
    let d = domain();
    let spec = symmetric_spec(&d);
    let y = field(Grid::from_fn(d.nely, d.nelx, |r, c| {
        0.2 + 0.7 * (((r * 5 + c * 3) % 7) as f64 / 6.0)
    }));
    let yhat = field(y.values().flip_rows());
    let rc = re_c(&y, &yhat, &spec, &d, 3.0, ComplianceMode::Grayscale).unwrap();
    assert!(rc.abs() < 1e-12, "{rc}");
    assert!(mae(y.values(), yhat.values()).unwrap() > 0.0);
    assert!(re_vf(y.values(), yhat.values()).unwrap().abs() < 1e-15);
}

#[test]
fn binarized_mode_thresholds_the_prediction() {
    let d = domain();
    let spec = symmetric_spec(&d);
    let y = DensityField::uniform(&d, 1.0).unwrap();
    let yhat = DensityField::uniform(&d, 0.6).unwrap();
    let gray = re_c(&y, &yhat, &spec, &d, 2.0, ComplianceMode::Grayscale).unwrap();
    let bin = re_c(&y, &yhat, &spec, &d, 2.0, ComplianceMode::Binarized).unwrap();
    assert!((gray - (1.0 / modulus(0.6, 2.0) - 1.0)).abs() < 1e-12);
    assert!(bin.abs() < 1e-12);
}

#[test]
fn shape_mismatch_is_an_error() {
    let d = domain();
    let spec = symmetric_spec(&d);
    let y = DensityField::uniform(&d, 0.5).unwrap();
    let other = DensityField::uniform(&DesignDomain::with_size(6, 12), 0.5).unwrap();
    assert!(matches!(
        re_c(&y, &other, &spec, &d, 3.0, ComplianceMode::Grayscale),
        Err(MetricsError::ShapeMismatch(..))
    ));
}

fn batch(d: &DesignDomain) -> (Vec<GroundTruth>, BTreeMap<u64, DensityField>) {
    let spec = symmetric_spec(d);
    let mut truth = Vec::new();
    let mut preds = BTreeMap::new();
    for (id, (a, b)) in [(10u64, (0.5, 0.5)), (3, (0.4, 0.5)), (7, (0.5, 0.45))] {
        truth.push(GroundTruth {
            sample_id: id,
            spec: spec.clone(),
            density: DensityField::uniform(d, a).unwrap(),
        });
        preds.insert(id, DensityField::uniform(d, b).unwrap());
    }
    (truth, preds)
}

#[test]
fn batch_report_by_hand() {
    let d = domain();
    let (truth, preds) = batch(&d);
    let opts = EvalOptions {
        penal: 2.0,
        ..EvalOptions::default()
    };
    let report = evaluate_batch(&preds, &truth, &d, None, opts).unwrap();
    assert_eq!(report.count, 3);
    let ids: Vec<u64> = report.samples.iter().map(|s| s.sample_id).collect();
    assert_eq!(ids, [3, 7, 10]);

    let mae_expect = (0.1 + 0.05 + 0.0) / 3.0;
    let mse_expect = (0.01 + 0.0025 + 0.0) / 3.0;
    let vf_expect = (0.25 - 0.1 + 0.0) / 3.0;
    let c = |a: f64, b: f64| modulus(a, 2.0) / modulus(b, 2.0) - 1.0;
    let c_expect = (c(0.4, 0.5) + c(0.5, 0.45) + 0.0) / 3.0;
    assert!((report.mae - mae_expect).abs() < 1e-12);
    assert!((report.mse - mse_expect).abs() < 1e-12);
    assert!((report.re_vf - vf_expect).abs() < 1e-12);
    assert!((report.re_c - c_expect).abs() < 1e-12);

    let sorted = report.sorted_re_vf();
    assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
    let total: usize = report.histogram_re_c.bins.iter().map(|b| b.count).sum();
    assert_eq!(total, 3);

    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 4);
    let mut series = Vec::new();
    report.write_sorted_series(&mut series).unwrap();
    assert_eq!(String::from_utf8(series).unwrap().lines().count(), 4);
    let json: serde_json::Value = serde_json::from_str(&report.summary_json()).unwrap();
    assert_eq!(json["count"], 3);
}

#[test]
fn batch_rejects_mismatched_ids() {
    let d = domain();
    let (truth, mut preds) = batch(&d);
    preds.remove(&3);
    preds.insert(4, DensityField::uniform(&d, 0.5).unwrap());
    assert!(matches!(
        evaluate_batch(&preds, &truth, &d, None, EvalOptions::default()),
        Err(MetricsError::IdMismatch(_))
    ));
}

#[test]
fn batch_aggregates_ignore_sample_order() {
    let d = domain();
    let (mut truth, preds) = batch(&d);
    let a = evaluate_batch(&preds, &truth, &d, None, EvalOptions::default()).unwrap();
    truth.reverse();
    let b = evaluate_batch(&preds, &truth, &d, None, EvalOptions::default()).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #[test]
    fn pixel_metric_invariants(
        vals in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 24),
    ) {
        let y = Grid::from_vec(4, 6, vals.iter().map(|v| v.0).collect()).unwrap();
        let yhat = Grid::from_vec(4, 6, vals.iter().map(|v| v.1).collect()).unwrap();
        let (e1, e2) = (mae(&y, &yhat).unwrap(), mse(&y, &yhat).unwrap());
        prop_assert!(e1 >= 0.0 && e2 >= 0.0);
        // every difference lies in [-1, 1], so squares never exceed magnitudes
        prop_assert!(e2 <= e1 + 1e-15);
        prop_assert_eq!(mae(&y, &y).unwrap(), 0.0);
        prop_assert_eq!(mae(&yhat, &y).unwrap(), e1);
        if y.sum() > 0.0 {
            let r = re_vf(&y, &yhat).unwrap();
            prop_assert!((r - (yhat.sum() - y.sum()) / y.sum()).abs() < 1e-12);
        }
    }
}
