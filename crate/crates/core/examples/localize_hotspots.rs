//! The thresholding rules applied to a hot-spot slice.

use tensor_hotspot::localize::{report_from_slice, ThresholdRule};
use tensor_hotspot::tensor::{AxisLabels, Matrix};

fn main() -> tensor_hotspot::Result<()> {
    let h = Matrix::from_rows(&[
        vec![0.00, 0.41, -0.20, 0.02],
        vec![0.38, 0.00, 0.00, 0.00],
        vec![0.01, 0.00, 0.44, -0.05],
    ])?;
    let labels = AxisLabels {
        locations: vec!["North".into(), "Centre".into(), "South".into()],
        categories: vec!["flu".into(), "measles".into(), "mumps".into(), "pertussis".into()],
        periods: Vec::new(),
    };
    for rule in ["order", "order:2", "hard:0.1", "soft:0.1"] {
        let rule: ThresholdRule = rule.parse()?;
        print!("{}", report_from_slice(&h, 9, rule, Some(&labels)));
    }
    Ok(())
}
