//! Balanced bisection tree over (r, z) and the treecode velocity path.
//!
//! A cell is accepted for target `x` when `diag / |x - centre| <= theta`.
//! Accepted cells act through proxy charges: with `order = 0` a single
//! monopole at the Γ-weighted centroid, otherwise the kernel is interpolated
//! in the source variables on a tensor Chebyshev grid of `(order+1)²` nodes
//! spanning the cell, and each proxy carries `Σ_j Γ_j L_a(r_j) L_b(z_j)`.
//! Cells holding no more particles than proxies are summed directly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{target_points, Targets, VelocityError, VelocitySample};
use crate::cloud::Cloud;
use crate::kernels::{kernel_raw, KernelConfig, KernelError, KernelPoint};
use crate::summation::{compensated_sum, NeumaierSum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreecodeConfig {
    pub theta: f64,
    /// Interpolation order per axis; 0 selects the monopole scheme.
    pub order: usize,
    pub leaf_capacity: usize,
}

impl Default for TreecodeConfig {
    fn default() -> Self {
        Self { theta: 0.5, order: 6, leaf_capacity: 32 }
    }
}

impl TreecodeConfig {
    pub fn validate(&self) -> Result<(), VelocityError> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(VelocityError::Config(format!("theta must lie in (0, 1), got {}", self.theta)));
        }
        if self.leaf_capacity == 0 {
            return Err(VelocityError::Config("leaf_capacity must be positive".into()));
        }
        if self.order > 24 {
            return Err(VelocityError::Config(format!("interpolation order {} exceeds 24", self.order)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub r_lo: f64,
    pub r_hi: f64,
    pub z_lo: f64,
    pub z_hi: f64,
    pub children: Option<[usize; 2]>,
    /// Range into [`Tree::order`].
    pub start: usize,
    pub end: usize,
    pub gamma: f64,
    pub centroid: KernelPoint,
    /// Proxy charges `(r, z, weight)`; empty until proxies are attached.
    pub proxies: Vec<[f64; 3]>,
}

impl TreeNode {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    pub fn diagonal(&self) -> f64 {
        (self.r_hi - self.r_lo).hypot(self.z_hi - self.z_lo)
    }

    fn centre(&self) -> (f64, f64) {
        (0.5 * (self.r_lo + self.r_hi), 0.5 * (self.z_lo + self.z_hi))
    }
}

/// Node arena; `nodes[0]` is the root.
#[derive(Debug, Clone)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
    /// Particle indices permuted so that every node owns a contiguous range.
    pub order: Vec<usize>,
}

impl Tree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }
}

fn make_node(c: &Cloud, order: &[usize], start: usize, end: usize) -> TreeNode {
    let ids = &order[start..end];
    let (mut r_lo, mut r_hi, mut z_lo, mut z_hi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &i in ids {
        let p = &c.particles[i];
        r_lo = r_lo.min(p.r);
        r_hi = r_hi.max(p.r);
        z_lo = z_lo.min(p.z);
        z_hi = z_hi.max(p.z);
    }
    if ids.is_empty() {
        (r_lo, r_hi, z_lo, z_hi) = (c.r0, c.r0, 0.0, 0.0);
    }
    let gamma = compensated_sum(ids.iter().map(|&i| c.particles[i].gamma));
    let centroid = if gamma > 0.0 {
        KernelPoint {
            r: compensated_sum(ids.iter().map(|&i| c.particles[i].gamma * c.particles[i].r)) / gamma,
            z: compensated_sum(ids.iter().map(|&i| c.particles[i].gamma * c.particles[i].z)) / gamma,
        }
    } else {
        KernelPoint { r: 0.5 * (r_lo + r_hi), z: 0.5 * (z_lo + z_hi) }
    };
    TreeNode { r_lo, r_hi, z_lo, z_hi, children: None, start, end, gamma, centroid, proxies: Vec::new() }
}

/// Median bisection along the longer side until at most `leaf_capacity`
/// particles remain. Ties in the split coordinate fall back to the index, so
/// the tree is a deterministic function of the cloud.
pub fn build_tree(c: &Cloud, leaf_capacity: usize) -> Tree {
    let cap = leaf_capacity.max(1);
    let mut order: Vec<usize> = (0..c.len()).collect();
    let mut nodes = vec![make_node(c, &order, 0, order.len())];
    let mut stack = vec![0usize];
    while let Some(ni) = stack.pop() {
        let (start, end) = (nodes[ni].start, nodes[ni].end);
        if end - start <= cap {
            continue;
        }
        let split_r = nodes[ni].r_hi - nodes[ni].r_lo >= nodes[ni].z_hi - nodes[ni].z_lo;
        let key = |i: usize| if split_r { c.particles[i].r } else { c.particles[i].z };
        let mid = start + (end - start) / 2;
        order[start..end].select_nth_unstable_by(mid - start, |&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
        let left = make_node(c, &order, start, mid);
        let right = make_node(c, &order, mid, end);
        let li = nodes.len();
        nodes.push(left);
        nodes.push(right);
        nodes[ni].children = Some([li, li + 1]);
        stack.push(li);
        stack.push(li + 1);
    }
    Tree { nodes, order }
}

/// Chebyshev points of the second kind on `[lo, hi]` with barycentric
/// weights; a single node when the interval is degenerate.
fn cheb_grid(lo: f64, hi: f64, p: usize) -> (Vec<f64>, Vec<f64>) {
    if !(hi > lo) || p == 0 {
        return (vec![0.5 * (lo + hi)], vec![1.0]);
    }
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let nodes: Vec<f64> = (0..=p).map(|k| mid + half * (k as f64 * std::f64::consts::PI / p as f64).cos()).collect();
    let weights: Vec<f64> = (0..=p)
        .map(|k| {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            if k == 0 || k == p {
                0.5 * s
            } else {
                s
            }
        })
        .collect();
    (nodes, weights)
}

fn lagrange(x: f64, nodes: &[f64], weights: &[f64], out: &mut Vec<f64>) {
    out.clear();
    if nodes.len() == 1 {
        out.push(1.0);
        return;
    }
    if let Some(k) = nodes.iter().position(|&n| n == x) {
        out.extend((0..nodes.len()).map(|i| if i == k { 1.0 } else { 0.0 }));
        return;
    }
    let mut denom = 0.0;
    for (n, w) in nodes.iter().zip(weights) {
        let t = w / (x - n);
        out.push(t);
        denom += t;
    }
    for v in out.iter_mut() {
        *v /= denom;
    }
}

fn attach_proxies(tree: &mut Tree, c: &Cloud, order: usize) {
    let tree_order = &tree.order;
    tree.nodes.par_iter_mut().for_each(|node| {
        if node.is_empty() {
            return;
        }
        if order == 0 {
            node.proxies = vec![[node.centroid.r, node.centroid.z, node.gamma]];
            return;
        }
        let (rn, rw) = cheb_grid(node.r_lo, node.r_hi, order);
        let (zn, zw) = cheb_grid(node.z_lo, node.z_hi, order);
        let mut q = vec![0.0; rn.len() * zn.len()];
        let (mut lr, mut lz) = (Vec::new(), Vec::new());
        for &i in &tree_order[node.start..node.end] {
            let p = &c.particles[i];
            lagrange(p.r, &rn, &rw, &mut lr);
            lagrange(p.z, &zn, &zw, &mut lz);
            for (a, la) in lr.iter().enumerate() {
                let g = p.gamma * la;
                for (b, lb) in lz.iter().enumerate() {
                    q[a * zn.len() + b] += g * lb;
                }
            }
        }
        node.proxies = Vec::with_capacity(q.len());
        for (a, &r) in rn.iter().enumerate() {
            for (b, &z) in zn.iter().enumerate() {
                node.proxies.push([r, z, q[a * zn.len() + b]]);
            }
        }
    });
}

fn singular(target: usize, source: usize) -> impl Fn(KernelError) -> VelocityError {
    move |e| match e {
        KernelError::Singular => VelocityError::Singular { target, particle: source },
        e => VelocityError::Kernel(e),
    }
}

fn eval_target(
    tree: &Tree,
    c: &Cloud,
    x: KernelPoint,
    own: Option<usize>,
    ti: usize,
    theta: f64,
    cfg: &KernelConfig,
) -> Result<VelocitySample, VelocityError> {
    let d2 = cfg.delta * cfg.delta;
    let mut ur = NeumaierSum::new();
    let mut uz = NeumaierSum::new();
    let mut stack = vec![0usize];
    while let Some(ni) = stack.pop() {
        let node = &tree.nodes[ni];
        if node.is_empty() {
            continue;
        }
        let (cr, cz) = node.centre();
        let dist = (x.r - cr).hypot(x.z - cz);
        let far = node.diagonal() <= theta * dist;
        if far && node.len() > node.proxies.len() {
            for pr in &node.proxies {
                // proxies lie inside the cell, which the target is outside of
                let (kr, kz) = kernel_raw(x.r, x.z, pr[0], pr[1], d2, cfg).map_err(singular(ti, tree.order[node.start]))?;
                ur.add(kr * pr[2]);
                uz.add(kz * pr[2]);
            }
        } else if far || node.is_leaf() {
            for &j in &tree.order[node.start..node.end] {
                if own == Some(j) {
                    continue;
                }
                let p = &c.particles[j];
                let (kr, kz) = kernel_raw(x.r, x.z, p.r, p.z, d2, cfg).map_err(singular(ti, j))?;
                ur.add(kr * p.gamma);
                uz.add(kz * p.gamma);
            }
        } else if let Some([a, b]) = node.children {
            stack.push(b);
            stack.push(a);
        }
    }
    Ok(VelocitySample { u_r: ur.value(), u_z: uz.value() })
}

pub fn velocity_treecode(
    c: &Cloud,
    targets: &Targets,
    tc: &TreecodeConfig,
    cfg: &KernelConfig,
) -> Result<Vec<VelocitySample>, VelocityError> {
    tc.validate()?;
    cfg.validate()?;
    let pts = target_points(c, targets)?;
    let mut tree = build_tree(c, tc.leaf_capacity);
    attach_proxies(&mut tree, c, tc.order);
    pts.par_iter()
        .enumerate()
        .map(|(ti, &(x, own))| eval_target(&tree, c, x, own, ti, tc.theta, cfg))
        .collect()
}
