use nalgebra::DMatrix;

use super::{DesignSystem, PenaltyProfile};

/// Appends an identity block for the outlier vector `κ`: `H′ = [H | I_n]`,
/// same `y`. The `κ` coefficients get L1 weight `μ` and no L2 weight, so the
/// elastic-net engine on the result solves the outlier-aware LASSO/GLMNET and
/// basis pursuit with unit `θ` weights solves the outlier-aware CS problem.
pub fn augment_outliers(sys: &DesignSystem, pen: &PenaltyProfile) -> (DesignSystem, PenaltyProfile) {
    let n = sys.rows();
    let p = sys.cols();
    let mut h = DMatrix::zeros(n, p + n);
    h.columns_mut(0, p).copy_from(&sys.h);
    h.columns_mut(p, n).fill_with_identity();

    let mut pen = pen.clone();
    pen.l1.extend(std::iter::repeat(pen.mu).take(n));
    pen.l2.extend(std::iter::repeat(0.0).take(n));
    (
        DesignSystem {
            h,
            y: sys.y.clone(),
        },
        pen,
    )
}
