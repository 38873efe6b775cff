//! Isoparametric bilinear quadrilateral.
//!
//! Local node order: `(i, j), (i+1, j), (i+1, j+1), (i, j+1)`, matching reference
//! corners `(-1,-1), (1,-1), (1,1), (-1,1)`.

const CORNERS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

/// Gauss-Legendre points and weights on `[-1, 1]`.
pub(crate) fn gauss_rule(order: usize) -> &'static [(f64, f64)] {
    const G2: [(f64, f64); 2] = [(-0.577_350_269_189_625_8, 1.0), (0.577_350_269_189_625_8, 1.0)];
    const G3: [(f64, f64); 3] = [
        (-0.774_596_669_241_483_4, 5.0 / 9.0),
        (0.0, 8.0 / 9.0),
        (0.774_596_669_241_483_4, 5.0 / 9.0),
    ];
    match order {
        2 => &G2,
        3 => &G3,
        _ => panic!("unsupported Gauss order {order}"),
    }
}

/// Shape values, physical gradients and `|det J|` at one reference point.
pub(crate) struct PointEval {
    pub shape: [f64; 4],
    pub dx: [f64; 4],
    pub dy: [f64; 4],
    pub jac: f64,
}

pub(crate) fn eval(xs: &[f64; 4], ys: &[f64; 4], xi: f64, eta: f64) -> PointEval {
    let mut shape = [0.0; 4];
    let mut dxi = [0.0; 4];
    let mut deta = [0.0; 4];
    for (a, &(ca, ea)) in CORNERS.iter().enumerate() {
        shape[a] = 0.25 * (1.0 + ca * xi) * (1.0 + ea * eta);
        dxi[a] = 0.25 * ca * (1.0 + ea * eta);
        deta[a] = 0.25 * ea * (1.0 + ca * xi);
    }
    let (mut x_xi, mut x_eta, mut y_xi, mut y_eta) = (0.0, 0.0, 0.0, 0.0);
    for a in 0..4 {
        x_xi += dxi[a] * xs[a];
        x_eta += deta[a] * xs[a];
        y_xi += dxi[a] * ys[a];
        y_eta += deta[a] * ys[a];
    }
    let det = x_xi * y_eta - x_eta * y_xi;
    let mut dx = [0.0; 4];
    let mut dy = [0.0; 4];
    for a in 0..4 {
        dx[a] = (y_eta * dxi[a] - y_xi * deta[a]) / det;
        dy[a] = (-x_eta * dxi[a] + x_xi * deta[a]) / det;
    }
    PointEval {
        shape,
        dx,
        dy,
        jac: det.abs(),
    }
}

/// Element stiffness `∫ ∇N_a·∇N_b` and drift load `∫ ∂_x N_a`.
pub(crate) fn stiffness(xs: &[f64; 4], ys: &[f64; 4]) -> ([[f64; 4]; 4], [f64; 4]) {
    let mut k = [[0.0; 4]; 4];
    let mut fx = [0.0; 4];
    for &(xi, wx) in gauss_rule(2) {
        for &(eta, wy) in gauss_rule(2) {
            let p = eval(xs, ys, xi, eta);
            let w = wx * wy * p.jac;
            for a in 0..4 {
                fx[a] += w * p.dx[a];
                for b in 0..4 {
                    k[a][b] += w * (p.dx[a] * p.dx[b] + p.dy[a] * p.dy[b]);
                }
            }
        }
    }
    (k, fx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_stiffness() {
        let (k, fx) = stiffness(&[0.0, 1.0, 1.0, 0.0], &[0.0, 0.0, 1.0, 1.0]);
        assert!((k[0][0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((k[0][1] + 1.0 / 6.0).abs() < 1e-14);
        assert!((k[0][2] + 1.0 / 3.0).abs() < 1e-14);
        for row in &k {
            assert!(row.iter().sum::<f64>().abs() < 1e-14);
        }
        assert!((fx[0] + 0.5).abs() < 1e-14 && (fx[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn linear_functions_have_exact_gradients_on_distorted_cells() {
        let xs = [0.0, 0.3, 0.3, 0.0];
        let ys = [0.1, -0.05, 0.6, 0.7];
        let f = |x: f64, y: f64| 2.0 * x - 3.0 * y + 1.0;
        let vals: Vec<f64> = (0..4).map(|a| f(xs[a], ys[a])).collect();
        let p = eval(&xs, &ys, 0.2, -0.4);
        let gx: f64 = (0..4).map(|a| vals[a] * p.dx[a]).sum();
        let gy: f64 = (0..4).map(|a| vals[a] * p.dy[a]).sum();
        assert!((gx - 2.0).abs() < 1e-12 && (gy + 3.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_orientation_keeps_positive_measure() {
        let (k_up, _) = stiffness(&[0.0, 1.0, 1.0, 0.0], &[0.0, 0.0, 1.0, 1.0]);
        let (k_dn, _) = stiffness(&[0.0, 1.0, 1.0, 0.0], &[0.0, 0.0, -1.0, -1.0]);
        for a in 0..4 {
            for b in 0..4 {
                assert!((k_up[a][b] - k_dn[a][b]).abs() < 1e-14);
            }
        }
    }
}
