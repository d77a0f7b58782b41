//! Centered B-spline shape functions for charge deposition and field
//! interpolation, orders m ∈ {0,1,2,3}. Order m couples a particle to
//! m+1 nodes per direction; the weights are an exact partition of unity,
//! which is what makes deposition conserve charge and constant fields
//! interpolate exactly.

use oscint::OscError;

/// Per-direction coupling of one particle to the grid: `base` is the first
/// (possibly negative, to be wrapped) node index, `weights[..len]` the
/// shape-function values at `base..base+len`.
#[derive(Clone, Copy, Debug)]
pub struct SplineWeights {
    pub base: i64,
    weights: [f64; 4],
    len: usize,
}

impl SplineWeights {
    /// Node index offsets and weights, in increasing node order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        (0..self.len).map(move |k| (self.base + k as i64, self.weights[k]))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Shape-function weights of a particle at coordinate `xp` on a uniform
/// periodic grid of spacing `dx`, spline order `m` ∈ {0,1,2,3}.
pub fn bspline_weights(xp: f64, dx: f64, m: usize) -> Result<SplineWeights, OscError> {
    if m > 3 {
        return Err(OscError::UnsupportedOrder { got: m, max: 3 });
    }
    let g = xp / dx;
    let mut w = [0.0f64; 4];
    let (base, len) = match m {
        0 => {
            // Nearest node.
            let i = g.round();
            w[0] = 1.0;
            (i as i64, 1)
        }
        1 => {
            // Linear hat on the enclosing cell.
            let i = g.floor();
            let f = g - i;
            w[0] = 1.0 - f;
            w[1] = f;
            (i as i64, 2)
        }
        2 => {
            // Quadratic, centered on the nearest node; δ ∈ [−1/2, 1/2].
            let i = g.round();
            let d = g - i;
            w[0] = 0.5 * (0.5 - d) * (0.5 - d);
            w[1] = 0.75 - d * d;
            w[2] = 0.5 * (0.5 + d) * (0.5 + d);
            (i as i64 - 1, 3)
        }
        _ => {
            // Cubic on the enclosing cell and one neighbor each side.
            let i = g.floor();
            let f = g - i;
            let f2 = f * f;
            let f3 = f2 * f;
            w[0] = (1.0 - f).powi(3) / 6.0;
            w[1] = (3.0 * f3 - 6.0 * f2 + 4.0) / 6.0;
            w[2] = (-3.0 * f3 + 3.0 * f2 + 3.0 * f + 1.0) / 6.0;
            w[3] = f3 / 6.0;
            (i as i64 - 1, 4)
        }
    };
    Ok(SplineWeights {
        base,
        weights: w,
        len,
    })
}
