//! The skeleton objective and its analytic gradient.
//!
//! For one cloud with samples `X` (n × 3) and logits `Z` (n × m):
//!
//! ```text
//! W   = column_softmax(Z)                      each column on the simplex
//! S   = Wᵀ X                                   skeleton points
//! d_ij = ‖x_i - s_j‖
//! D_i = Σ_j a_ij d_ij,  a_i· = softmax(-d_i· / T)   smoothed nearest distance
//! r   = Wᵀ D                                   radii
//! ```
//!
//! `L_bsp = L_s + λ₁ L_p + λ₂ L_r` is evaluated on `(S, r)`, and a pair of
//! clouds is coupled through `L_ddl(A·Sˣ, Sʸ)` for a fixed rigid alignment
//! `A`. Gradients are propagated by hand back to `Z`; the hard nearest
//! neighbour choices inside the losses are treated as locally constant.

use nalgebra::DMatrix;

use crate::geometry::{RigidTransform, SpatialIndex, Vec3};

const SOFTMIN_CUTOFF: f64 = 40.0;
const INV_SQRT3: f64 = 0.577_350_269_189_625_8;

/// Fixed directions used to place eight points on each skeletal sphere: the
/// cube diagonals, i.e. four antipodal pairs.
pub const SURFACE_DIRECTIONS: [[f64; 3]; 8] = [
    [INV_SQRT3, INV_SQRT3, INV_SQRT3],
    [INV_SQRT3, INV_SQRT3, -INV_SQRT3],
    [INV_SQRT3, -INV_SQRT3, INV_SQRT3],
    [INV_SQRT3, -INV_SQRT3, -INV_SQRT3],
    [-INV_SQRT3, INV_SQRT3, INV_SQRT3],
    [-INV_SQRT3, INV_SQRT3, -INV_SQRT3],
    [-INV_SQRT3, -INV_SQRT3, INV_SQRT3],
    [-INV_SQRT3, -INV_SQRT3, -INV_SQRT3],
];

fn dirs() -> [Vec3; 8] {
    SURFACE_DIRECTIONS.map(Vec3::from)
}

/// Index and distance of the point of `set` nearest to `q`; ties go to the
/// lowest index.
pub(crate) fn nearest_brute(q: &Vec3, set: &[Vec3]) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY);
    for (k, p) in set.iter().enumerate() {
        let d2 = (p - q).norm_squared();
        if d2 < best.1 {
            best = (k, d2);
        }
    }
    (best.0, best.1.sqrt())
}

/// Unit vector from `b` to `a`, or zero when they coincide.
fn unit_diff(a: &Vec3, b: &Vec3, dist: f64) -> Vec3 {
    if dist > 0.0 {
        (a - b) / dist
    } else {
        Vec3::zeros()
    }
}

/// Softmax down each column.
pub fn column_softmax(z: &DMatrix<f64>) -> DMatrix<f64> {
    let mut w = z.clone();
    for mut col in w.column_iter_mut() {
        let max = col.max();
        col.apply(|v| *v = (*v - max).exp());
        let sum = col.sum();
        col /= sum;
    }
    w
}

/// Forward quantities of one cloud at given logits.
#[derive(Clone, Debug)]
pub struct CloudState {
    pub weights: DMatrix<f64>,
    pub points: Vec<Vec3>,
    /// `d_ij = ‖x_i - s_j‖`, n × m.
    pub dist: DMatrix<f64>,
    /// Soft-min weights `a_ij`, n × m.
    pub soft: DMatrix<f64>,
    /// Smoothed nearest-skeleton distance per sample.
    pub soft_distances: Vec<f64>,
    /// `Wᵀ D` with the smoothed distances.
    pub radii: Vec<f64>,
}

pub fn forward(samples: &[Vec3], logits: &DMatrix<f64>, temperature: f64) -> CloudState {
    let n = samples.len();
    let m = logits.ncols();
    let weights = column_softmax(logits);
    let points: Vec<Vec3> = (0..m)
        .map(|j| {
            samples
                .iter()
                .enumerate()
                .fold(Vec3::zeros(), |acc, (i, x)| acc + x * weights[(i, j)])
        })
        .collect();
    let dist = DMatrix::from_fn(n, m, |i, j| (samples[i] - points[j]).norm());
    let mut soft = DMatrix::zeros(n, m);
    let mut soft_distances = vec![0.0; n];
    for i in 0..n {
        let row_min = dist.row(i).min();
        let mut z = 0.0;
        for j in 0..m {
            let x = (dist[(i, j)] - row_min) / temperature;
            // Weights below e^-40 are zero to working precision next to the
            // nearest term, which has weight one before normalisation.
            if x < SOFTMIN_CUTOFF {
                let e = (-x).exp();
                soft[(i, j)] = e;
                z += e;
            }
        }
        let mut acc = 0.0;
        for j in 0..m {
            soft[(i, j)] /= z;
            acc += soft[(i, j)] * dist[(i, j)];
        }
        soft_distances[i] = acc;
    }
    let radii = (0..m)
        .map(|j| (0..n).map(|i| weights[(i, j)] * soft_distances[i]).sum())
        .collect();
    CloudState {
        weights,
        points,
        dist,
        soft,
        soft_distances,
        radii,
    }
}

/// Skeleton points `Wᵀ X` for the given logits.
pub fn forward_points(samples: &[Vec3], logits: &DMatrix<f64>) -> Vec<Vec3> {
    let weights = column_softmax(logits);
    weights
        .column_iter()
        .map(|col| {
            samples
                .iter()
                .zip(col.iter())
                .fold(Vec3::zeros(), |acc, (x, w)| acc + x * *w)
        })
        .collect()
}

/// A loss value with its gradient with respect to skeleton points and radii.
#[derive(Clone, Debug)]
pub struct TermGrad {
    pub value: f64,
    pub d_points: Vec<Vec3>,
    pub d_radii: Vec<f64>,
}

impl TermGrad {
    fn zeros(m: usize) -> Self {
        Self {
            value: 0.0,
            d_points: vec![Vec3::zeros(); m],
            d_radii: vec![0.0; m],
        }
    }
}

/// `L_s`: mean nearest distance from samples to sphere-surface points plus
/// mean nearest distance from surface points to samples.
pub fn sampling_loss(samples: &[Vec3], points: &[Vec3], radii: &[f64]) -> TermGrad {
    let m = points.len();
    let dirs = dirs();
    let surface: Vec<Vec3> = points
        .iter()
        .zip(radii)
        .flat_map(|(s, &r)| dirs.iter().map(move |u| s + u * r))
        .collect();
    let mut g_surface = vec![Vec3::zeros(); surface.len()];
    let n = samples.len() as f64;
    let ns = surface.len() as f64;
    let surface_index = SpatialIndex::new(&surface);
    let sample_index = SpatialIndex::new(samples);
    let mut forward_sum = 0.0;
    for x in samples {
        let (k, d2) = surface_index.nearest(x).expect("surface is non-empty");
        let d = d2.sqrt();
        forward_sum += d;
        g_surface[k] += unit_diff(&surface[k], x, d) / n;
    }
    let mut backward_sum = 0.0;
    for (k, p) in surface.iter().enumerate() {
        let (i, d2) = sample_index.nearest(p).expect("samples are non-empty");
        let d = d2.sqrt();
        backward_sum += d;
        g_surface[k] += unit_diff(p, &samples[i], d) / ns;
    }
    let mut out = TermGrad::zeros(m);
    out.value = forward_sum / n + backward_sum / ns;
    for j in 0..m {
        for (u, g) in dirs.iter().zip(&g_surface[8 * j..8 * j + 8]) {
            out.d_points[j] += g;
            out.d_radii[j] += g.dot(u);
        }
    }
    out
}

/// `L_p`: mean over samples of `(‖x - s_nn‖ - r_nn)²` for the nearest centre,
/// plus mean over spheres of `(min_i ‖s_j - x_i‖ - r_j)²`.
pub fn point_sphere_loss(samples: &[Vec3], points: &[Vec3], radii: &[f64]) -> TermGrad {
    let m = points.len();
    let n = samples.len() as f64;
    let mut out = TermGrad::zeros(m);
    let mut first = 0.0;
    for x in samples {
        let (j, d) = nearest_brute(x, points);
        let e = d - radii[j];
        first += e * e;
        out.d_points[j] += unit_diff(&points[j], x, d) * (2.0 * e / n);
        out.d_radii[j] -= 2.0 * e / n;
    }
    let mut second = 0.0;
    for (j, s) in points.iter().enumerate() {
        let (i, d) = nearest_brute(s, samples);
        let f = d - radii[j];
        second += f * f;
        out.d_points[j] += unit_diff(s, &samples[i], d) * (2.0 * f / m as f64);
        out.d_radii[j] -= 2.0 * f / m as f64;
    }
    out.value = first / n + second / m as f64;
    out
}

/// `L_r = -mean(r)`.
pub fn radius_loss(radii: &[f64]) -> TermGrad {
    let m = radii.len();
    let mut out = TermGrad::zeros(m);
    out.value = -radii.iter().sum::<f64>() / m as f64;
    out.d_radii.fill(-1.0 / m as f64);
    out
}

/// `L_ddl(A·Sˣ, Sʸ)` with gradients for both skeletons (A held fixed).
pub fn ddl_loss(source: &[Vec3], target: &[Vec3], alignment: &RigidTransform) -> (f64, Vec<Vec3>, Vec<Vec3>) {
    let moved: Vec<Vec3> = source.iter().map(|p| alignment.apply(p)).collect();
    let mut g_moved = vec![Vec3::zeros(); moved.len()];
    let mut g_target = vec![Vec3::zeros(); target.len()];
    let mut ab = 0.0;
    for (j, a) in moved.iter().enumerate() {
        let (k, d) = nearest_brute(a, target);
        ab += d;
        let u = unit_diff(a, &target[k], d);
        g_moved[j] += u;
        g_target[k] -= u;
    }
    let mut ba = 0.0;
    for (k, b) in target.iter().enumerate() {
        let (j, d) = nearest_brute(b, &moved);
        ba += d;
        let u = unit_diff(b, &moved[j], d);
        g_target[k] += u;
        g_moved[j] -= u;
    }
    let rt = alignment.rotation().transpose();
    let g_source = g_moved.iter().map(|g| rt * g).collect();
    (ab + ba, g_source, g_target)
}

/// Pulls gradients with respect to `(S, r)` back to the logits.
pub fn backprop(
    samples: &[Vec3],
    state: &CloudState,
    d_points: &[Vec3],
    d_radii: &[f64],
    temperature: f64,
) -> DMatrix<f64> {
    let n = samples.len();
    let m = state.points.len();
    let w = &state.weights;
    // r = Wᵀ D  →  dL/dD = W dL/dr
    let g_d: Vec<f64> = (0..n)
        .map(|i| (0..m).map(|j| w[(i, j)] * d_radii[j]).sum())
        .collect();
    // D depends on S through the soft-min of distances
    let mut g_s: Vec<Vec3> = d_points.to_vec();
    for i in 0..n {
        if g_d[i] == 0.0 {
            continue;
        }
        let big_d = state.soft_distances[i];
        for (j, (g, s)) in g_s.iter_mut().zip(&state.points).enumerate() {
            let d = state.dist[(i, j)];
            if d <= 0.0 {
                continue;
            }
            let a = state.soft[(i, j)];
            if a == 0.0 {
                continue;
            }
            let dd = a * (1.0 - (d - big_d) / temperature);
            *g += (s - samples[i]) * (g_d[i] * dd / d);
        }
    }
    // S = Wᵀ X and r = Wᵀ D  →  dL/dW_ij = x_i · gS_j + D_i gr_j
    let g_w = DMatrix::from_fn(n, m, |i, j| {
        samples[i].dot(&g_s[j]) + state.soft_distances[i] * d_radii[j]
    });
    // column softmax
    let mut g_z = DMatrix::zeros(n, m);
    for j in 0..m {
        let inner: f64 = (0..n).map(|k| w[(k, j)] * g_w[(k, j)]).sum();
        for i in 0..n {
            g_z[(i, j)] = w[(i, j)] * (g_w[(i, j)] - inner);
        }
    }
    g_z
}

/// Loss weights and constants shared by the per-cloud and pair objectives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda_ddl: f64,
    pub temperature: f64,
}

/// Values of the loss components, summed over the clouds involved.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ComponentValues {
    pub l_s: f64,
    pub l_p: f64,
    pub l_r: f64,
    pub l_ddl: f64,
    pub total: f64,
}

impl ComponentValues {
    pub fn is_finite(&self) -> bool {
        [self.l_s, self.l_p, self.l_r, self.l_ddl, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Per-component gradients with respect to the source and target logits.
#[derive(Clone, Debug)]
pub struct ComponentGradients {
    pub l_s: [DMatrix<f64>; 2],
    pub l_p: [DMatrix<f64>; 2],
    pub l_r: [DMatrix<f64>; 2],
    pub l_ddl: [DMatrix<f64>; 2],
    pub total: [DMatrix<f64>; 2],
}

struct CloudTerms {
    state: CloudState,
    l_s: TermGrad,
    l_p: TermGrad,
    l_r: TermGrad,
}

fn cloud_terms(samples: &[Vec3], logits: &DMatrix<f64>, temperature: f64) -> CloudTerms {
    let state = forward(samples, logits, temperature);
    let l_s = sampling_loss(samples, &state.points, &state.radii);
    let l_p = point_sphere_loss(samples, &state.points, &state.radii);
    let l_r = radius_loss(&state.radii);
    CloudTerms { state, l_s, l_p, l_r }
}

/// Objective of a single cloud: `L_bsp` only.
#[derive(Clone, Copy, Debug)]
pub struct CloudObjective<'a> {
    pub samples: &'a [Vec3],
    pub weights: LossWeights,
}

impl CloudObjective<'_> {
    pub fn value(&self, logits: &DMatrix<f64>) -> ComponentValues {
        let t = cloud_terms(self.samples, logits, self.weights.temperature);
        let mut v = ComponentValues {
            l_s: t.l_s.value,
            l_p: t.l_p.value,
            l_r: t.l_r.value,
            ..Default::default()
        };
        v.total = v.l_s + self.weights.lambda1 * v.l_p + self.weights.lambda2 * v.l_r;
        v
    }

    pub fn value_and_gradient(&self, logits: &DMatrix<f64>) -> (ComponentValues, DMatrix<f64>) {
        let lw = self.weights;
        let t = cloud_terms(self.samples, logits, lw.temperature);
        let m = logits.ncols();
        let mut gp = vec![Vec3::zeros(); m];
        let mut gr = vec![0.0; m];
        for j in 0..m {
            gp[j] = t.l_s.d_points[j] + t.l_p.d_points[j] * lw.lambda1;
            gr[j] = t.l_s.d_radii[j] + lw.lambda1 * t.l_p.d_radii[j] + lw.lambda2 * t.l_r.d_radii[j];
        }
        let g = backprop(self.samples, &t.state, &gp, &gr, lw.temperature);
        let total = t.l_s.value + lw.lambda1 * t.l_p.value + lw.lambda2 * t.l_r.value;
        let v = ComponentValues {
            l_s: t.l_s.value,
            l_p: t.l_p.value,
            l_r: t.l_r.value,
            l_ddl: 0.0,
            total,
        };
        (v, g)
    }
}

/// Joint objective `L_bsp(X) + L_bsp(Y) + λ_ddl · L_ddl(A·Sˣ, Sʸ)`.
#[derive(Clone, Copy, Debug)]
pub struct PairObjective<'a> {
    pub source: &'a [Vec3],
    pub target: &'a [Vec3],
    pub alignment: &'a RigidTransform,
    pub weights: LossWeights,
}

impl PairObjective<'_> {
    fn combine(&self, tx: &CloudTerms, ty: &CloudTerms, ddl: f64) -> ComponentValues {
        let lw = self.weights;
        let l_s = tx.l_s.value + ty.l_s.value;
        let l_p = tx.l_p.value + ty.l_p.value;
        let l_r = tx.l_r.value + ty.l_r.value;
        ComponentValues {
            l_s,
            l_p,
            l_r,
            l_ddl: ddl,
            total: l_s + lw.lambda1 * l_p + lw.lambda2 * l_r + lw.lambda_ddl * ddl,
        }
    }

    pub fn value(&self, zx: &DMatrix<f64>, zy: &DMatrix<f64>) -> ComponentValues {
        let tx = cloud_terms(self.source, zx, self.weights.temperature);
        let ty = cloud_terms(self.target, zy, self.weights.temperature);
        let (ddl, _, _) = ddl_loss(&tx.state.points, &ty.state.points, self.alignment);
        self.combine(&tx, &ty, ddl)
    }

    /// Value and gradient of the weighted total.
    pub fn value_and_gradient(&self, zx: &DMatrix<f64>, zy: &DMatrix<f64>) -> (ComponentValues, [DMatrix<f64>; 2]) {
        let lw = self.weights;
        let tx = cloud_terms(self.source, zx, lw.temperature);
        let ty = cloud_terms(self.target, zy, lw.temperature);
        let (ddl, gdx, gdy) = ddl_loss(&tx.state.points, &ty.state.points, self.alignment);
        let values = self.combine(&tx, &ty, ddl);
        let grad = |t: &CloudTerms, gd: &[Vec3], samples: &[Vec3]| {
            let m = gd.len();
            let gp: Vec<Vec3> = (0..m)
                .map(|j| t.l_s.d_points[j] + t.l_p.d_points[j] * lw.lambda1 + gd[j] * lw.lambda_ddl)
                .collect();
            let gr: Vec<f64> = (0..m)
                .map(|j| t.l_s.d_radii[j] + lw.lambda1 * t.l_p.d_radii[j] + lw.lambda2 * t.l_r.d_radii[j])
                .collect();
            backprop(samples, &t.state, &gp, &gr, lw.temperature)
        };
        let gx = grad(&tx, &gdx, self.source);
        let gy = grad(&ty, &gdy, self.target);
        (values, [gx, gy])
    }

    /// Unweighted gradient of every component, plus the weighted total.
    pub fn component_gradients(&self, zx: &DMatrix<f64>, zy: &DMatrix<f64>) -> (ComponentValues, ComponentGradients) {
        let lw = self.weights;
        let tx = cloud_terms(self.source, zx, lw.temperature);
        let ty = cloud_terms(self.target, zy, lw.temperature);
        let (ddl, gdx, gdy) = ddl_loss(&tx.state.points, &ty.state.points, self.alignment);
        let values = self.combine(&tx, &ty, ddl);
        let zero_r = vec![0.0; zx.ncols()];
        let bp = |t: &CloudTerms, samples: &[Vec3], gp: &[Vec3], gr: &[f64]| {
            backprop(samples, &t.state, gp, gr, lw.temperature)
        };
        let pair = |f: &dyn Fn(&CloudTerms, &[Vec3]) -> DMatrix<f64>| [f(&tx, self.source), f(&ty, self.target)];
        let l_s = pair(&|t, x| bp(t, x, &t.l_s.d_points, &t.l_s.d_radii));
        let l_p = pair(&|t, x| bp(t, x, &t.l_p.d_points, &t.l_p.d_radii));
        let l_r = pair(&|t, x| bp(t, x, &t.l_r.d_points, &t.l_r.d_radii));
        let l_ddl = [bp(&tx, self.source, &gdx, &zero_r), bp(&ty, self.target, &gdy, &zero_r)];
        let total = [0, 1].map(|c| {
            &l_s[c] + &l_p[c] * lw.lambda1 + &l_r[c] * lw.lambda2 + &l_ddl[c] * lw.lambda_ddl
        });
        (
            values,
            ComponentGradients {
                l_s,
                l_p,
                l_r,
                l_ddl,
                total,
            },
        )
    }
}
