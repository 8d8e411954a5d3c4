use nalgebra::{SMatrix, SVector};

pub type BMat = SMatrix<f64, 3, 8>;
pub type ElemMat = SMatrix<f64, 8, 8>;
pub type ElemVec = SVector<f64, 8>;

/// Strain-displacement matrices of a `hx × hy` bilinear quadrilateral at its
/// 2×2 Gauss points, with the integration weight `det J` of each point.
/// Rows are `εxx, εyy, γxy`.
#[derive(Debug, Clone)]
pub struct Q4 {
    pub b: [BMat; 4],
    pub weight: f64,
}

impl Q4 {
    pub fn new(hx: f64, hy: f64) -> Self {
        let g = 1.0 / 3f64.sqrt();
        let points = [(-g, -g), (g, -g), (g, g), (-g, g)];
        let corners = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
        let b = points.map(|(xi, eta)| {
            let mut b = BMat::zeros();
            for (a, &(xa, ya)) in corners.iter().enumerate() {
                let dx = 0.25 * xa * (1.0 + ya * eta) * 2.0 / hx;
                let dy = 0.25 * ya * (1.0 + xa * xi) * 2.0 / hy;
                b[(0, 2 * a)] = dx;
                b[(1, 2 * a + 1)] = dy;
                b[(2, 2 * a)] = dy;
                b[(2, 2 * a + 1)] = dx;
            }
            b
        });
        Self {
            b,
            weight: 0.25 * hx * hy,
        }
    }

    /// `Σ Bᵀ D B · w` for a constant in-plane tangent `d`.
    pub fn stiffness(&self, d: &SMatrix<f64, 3, 3>) -> ElemMat {
        self.b
            .iter()
            .fold(ElemMat::zeros(), |k, b| k + b.transpose() * d * b * self.weight)
    }
}
