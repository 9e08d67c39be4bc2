use faer::Mat;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::prox::prox_into;
use super::psd::{project_psd_in_place, symmetric_eigenvalues};
use super::{Cone, ConicProblem, IterRecord, SolveOptions, SolveReport};

/// Packed coordinates: the upper triangle of a symmetric matrix (off-diagonal
/// entries weighted by 2 so the packed norm is the Frobenius norm), or the
/// entries of a vector.
struct Layout {
    cone: Cone,
    dim: usize,
    index: Vec<usize>,
    coords: Vec<(usize, usize)>,
    mult: Vec<f64>,
    fixed: Vec<Option<f64>>,
}

impl Layout {
    fn new(p: &ConicProblem) -> Self {
        let dim = p.dim;
        let (index, coords, mult) = match p.cone {
            Cone::Psd => {
                let mut index = vec![0; dim * dim];
                let mut coords = Vec::with_capacity(dim * (dim + 1) / 2);
                let mut mult = Vec::with_capacity(coords.capacity());
                for r in 0..dim {
                    for c in r..dim {
                        index[r * dim + c] = coords.len();
                        index[c * dim + r] = coords.len();
                        coords.push((r, c));
                        mult.push(if r == c { 1.0 } else { 2.0 });
                    }
                }
                (index, coords, mult)
            }
            Cone::Free => (
                (0..dim).collect(),
                (0..dim).map(|r| (r, 0)).collect(),
                vec![1.0; dim],
            ),
        };
        let mut layout = Layout {
            cone: p.cone,
            dim,
            fixed: vec![None; coords.len()],
            index,
            coords,
            mult,
        };
        for b in &p.fixed_blocks {
            for i in 0..b.value.nrows() {
                for j in 0..b.value.ncols() {
                    let k = layout.var(b.row + i, b.col + j);
                    layout.fixed[k] = Some(b.value[(i, j)]);
                }
            }
        }
        for &(r, c) in &p.anchor_zeros {
            let k = layout.var(r, c);
            layout.fixed[k] = Some(0.0);
        }
        layout
    }

    fn len(&self) -> usize {
        self.coords.len()
    }

    fn var(&self, r: usize, c: usize) -> usize {
        match self.cone {
            Cone::Psd => self.index[r * self.dim + c],
            Cone::Free => {
                assert_eq!(c, 0, "free variables are column vectors");
                r
            }
        }
    }

    fn unpack_into(&self, packed: &[f64], m: &mut Mat<f64>) {
        for (k, &(r, c)) in self.coords.iter().enumerate() {
            m[(r, c)] = packed[k];
            m[(c, r)] = packed[k];
        }
    }

    fn pack_from(&self, m: &Mat<f64>, out: &mut [f64]) {
        for (k, &(r, c)) in self.coords.iter().enumerate() {
            out[k] = m[(r, c)];
        }
    }

    fn to_matrix(&self, packed: &[f64]) -> DMatrix<f64> {
        match self.cone {
            Cone::Psd => {
                let mut m = DMatrix::zeros(self.dim, self.dim);
                for (k, &(r, c)) in self.coords.iter().enumerate() {
                    m[(r, c)] = packed[k];
                    m[(c, r)] = packed[k];
                }
                m
            }
            Cone::Free => DMatrix::from_column_slice(self.dim, 1, packed),
        }
    }
}

/// Slice rows compiled to packed free variables; fixed entries are folded
/// into the offsets.
struct Rows {
    start: Vec<usize>,
    var: Vec<usize>,
    coef: Vec<f64>,
    offset: Vec<f64>,
    term_start: Vec<usize>,
}

impl Rows {
    fn new(p: &ConicProblem, layout: &Layout) -> Self {
        let mut rows = Rows {
            start: vec![0],
            var: Vec::new(),
            coef: Vec::new(),
            offset: Vec::new(),
            term_start: vec![0],
        };
        for term in &p.terms {
            for row in &term.rows {
                let mut offset = row.offset;
                let mut acc: Vec<(usize, f64)> = Vec::new();
                for &(r, c, a) in &row.entries {
                    let k = layout.var(r, c);
                    match layout.fixed[k] {
                        Some(val) => offset -= a * val,
                        None => match acc.iter_mut().find(|(v, _)| *v == k) {
                            Some(e) => e.1 += a,
                            None => acc.push((k, a)),
                        },
                    }
                }
                for (k, a) in acc {
                    if a != 0.0 {
                        rows.var.push(k);
                        rows.coef.push(a);
                    }
                }
                rows.start.push(rows.var.len());
                rows.offset.push(offset);
            }
            rows.term_start.push(rows.offset.len());
        }
        rows
    }

    fn len(&self) -> usize {
        self.offset.len()
    }

    fn eval(&self, packed: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = -self.offset[i];
            for p in self.start[i]..self.start[i + 1] {
                s += self.coef[p] * packed[self.var[p]];
            }
            *o = s;
        }
    }
}

/// A connected group of free variables coupled through slice rows, with the
/// Cholesky factor of its normal matrix `diag(w) + Σ a aᵀ`. Over the free
/// cone the copy weight `w` is zero when the rows alone determine the
/// variables, which turns the splitting into plain ADMM on the slices.
struct Component {
    vars: Vec<usize>,
    rows: Vec<usize>,
    chol: Cholesky<f64, Dyn>,
    rhs: DVector<f64>,
}

fn find(parent: &mut [usize], mut a: usize) -> usize {
    while parent[a] != a {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    a
}

/// Groups the free variables into components and returns, for each row
/// entry, the position of its variable inside its component, and the copy
/// weight of every variable.
fn components(layout: &Layout, rows: &Rows) -> (Vec<Component>, Vec<usize>, Vec<f64>) {
    let n = layout.len();
    let mut parent: Vec<usize> = (0..n).collect();
    let mut touched = vec![false; n];
    for i in 0..rows.len() {
        let vars = &rows.var[rows.start[i]..rows.start[i + 1]];
        for &v in vars {
            touched[v] = true;
        }
        for w in vars.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut slot = vec![usize::MAX; n];
    let mut local = vec![usize::MAX; n];
    let mut groups: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    for v in 0..n {
        if touched[v] {
            let root = find(&mut parent, v);
            if slot[root] == usize::MAX {
                slot[root] = groups.len();
                groups.push((Vec::new(), Vec::new()));
            }
            local[v] = groups[slot[root]].0.len();
            groups[slot[root]].0.push(v);
        }
    }
    for i in 0..rows.len() {
        if rows.start[i] < rows.start[i + 1] {
            let root = find(&mut parent, rows.var[rows.start[i]]);
            groups[slot[root]].1.push(i);
        }
    }
    let entry_local: Vec<usize> = rows.var.iter().map(|&v| local[v]).collect();
    let mut weight = layout.mult.clone();
    let comps = groups
        .into_iter()
        .map(|(vars, rs)| {
            let s = vars.len();
            let mut h = DMatrix::<f64>::zeros(s, s);
            for &i in &rs {
                for p in rows.start[i]..rows.start[i + 1] {
                    for q in rows.start[i]..rows.start[i + 1] {
                        h[(entry_local[p], entry_local[q])] += rows.coef[p] * rows.coef[q];
                    }
                }
            }
            let scale = h.diagonal().max().max(1.0);
            let bare = match layout.cone {
                Cone::Free => Cholesky::new(h.clone()).filter(|c| {
                    c.l_dirty().diagonal().min().powi(2) > 1e-10 * scale
                }),
                Cone::Psd => None,
            };
            let chol = match bare {
                Some(c) => {
                    for &v in &vars {
                        weight[v] = 0.0;
                    }
                    c
                }
                None => {
                    for (a, &v) in vars.iter().enumerate() {
                        h[(a, a)] += layout.mult[v];
                    }
                    Cholesky::new(h).expect("normal matrix is positive definite")
                }
            };
            Component {
                vars,
                rows: rs,
                chol,
                rhs: DVector::zeros(s),
            }
        })
        .collect();
    (comps, entry_local, weight)
}

/// Residuals of one ADMM step.
#[derive(Debug, Clone, Copy)]
struct StepInfo {
    r_pri: f64,
    r_dual: f64,
    scale_p: f64,
    scale_d: f64,
}

/// One ADMM iteration as a map on the state `z = (V, U, λ)`.
struct Engine<'a> {
    problem: &'a ConicProblem,
    layout: Layout,
    rows: Rows,
    comps: Vec<Component>,
    entry_local: Vec<usize>,
    weight: Vec<f64>,
    alpha: f64,
    mat: Mat<f64>,
    x: Vec<f64>,
    xt: Vec<f64>,
    y: Vec<f64>,
    yt: Vec<f64>,
    sv: Vec<f64>,
    sv_new: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> Engine<'a> {
    fn new(problem: &'a ConicProblem, alpha: f64) -> Self {
        let layout = Layout::new(problem);
        let rows = Rows::new(problem, &layout);
        let (comps, entry_local, weight) = components(&layout, &rows);
        let (nv, nr) = (layout.len(), rows.len());
        let mat = match layout.cone {
            Cone::Psd => Mat::<f64>::zeros(layout.dim, layout.dim),
            Cone::Free => Mat::<f64>::zeros(0, 0),
        };
        Engine {
            problem,
            layout,
            rows,
            comps,
            entry_local,
            weight,
            alpha,
            mat,
            x: vec![0.0; nv],
            xt: vec![0.0; nv],
            y: vec![0.0; nr],
            yt: vec![0.0; nr],
            sv: vec![0.0; nr],
            sv_new: vec![0.0; nr],
            scratch: vec![0.0; nr],
        }
    }

    fn state_len(&self) -> usize {
        2 * self.layout.len() + self.rows.len()
    }

    fn initial_state(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.state_len()];
        for (k, f) in self.layout.fixed.iter().enumerate() {
            z[k] = f.unwrap_or(0.0);
        }
        z
    }

    /// Writes `T(z)` into `out`.
    fn apply(&mut self, z: &[f64], rho: f64, out: &mut [f64]) -> StepInfo {
        let nv = self.layout.len();
        let nr = self.rows.len();
        let (v, rest) = z.split_at(nv);
        let (u, lam) = rest.split_at(nv);
        let (v_out, rest) = out.split_at_mut(nv);
        let (u_out, lam_out) = rest.split_at_mut(nv);
        let alpha = self.alpha;
        let mult = &self.weight;

        self.rows.eval(v, &mut self.sv);

        // Block one: cone projection and slice proxes.
        for k in 0..nv {
            self.x[k] = v[k] - u[k];
        }
        if self.layout.cone == Cone::Psd {
            self.layout.unpack_into(&self.x, &mut self.mat);
            project_psd_in_place(&mut self.mat);
            self.layout.pack_from(&self.mat, &mut self.x);
        }
        for i in 0..nr {
            self.scratch[i] = self.sv[i] - lam[i];
        }
        for (k, term) in self.problem.terms.iter().enumerate() {
            let (a, b) = (self.rows.term_start[k], self.rows.term_start[k + 1]);
            prox_into(
                term.kind,
                term.weight,
                1.0 / rho,
                &self.scratch[a..b],
                &mut self.y[a..b],
            );
        }
        for k in 0..nv {
            self.xt[k] = alpha * self.x[k] + (1.0 - alpha) * v[k];
        }
        for i in 0..nr {
            self.yt[i] = alpha * self.y[i] + (1.0 - alpha) * self.sv[i];
        }

        // Block two: least squares for V with fixed entries held.
        for k in 0..nv {
            v_out[k] = match self.layout.fixed[k] {
                Some(f) => f,
                None => self.xt[k] + u[k],
            };
        }
        for comp in &mut self.comps {
            for (a, &g) in comp.vars.iter().enumerate() {
                comp.rhs[a] = mult[g] * (self.xt[g] + u[g]);
            }
            for &i in &comp.rows {
                let zi = self.yt[i] + lam[i] + self.rows.offset[i];
                for p in self.rows.start[i]..self.rows.start[i + 1] {
                    comp.rhs[self.entry_local[p]] += self.rows.coef[p] * zi;
                }
            }
            comp.chol.solve_mut(&mut comp.rhs);
            for (a, &g) in comp.vars.iter().enumerate() {
                v_out[g] = comp.rhs[a];
            }
        }
        self.rows.eval(v_out, &mut self.sv_new);

        // Dual updates and residuals.
        let (mut p2, mut d2) = (0.0, 0.0);
        let (mut xn, mut vn, mut un) = (0.0, 0.0, 0.0);
        for k in 0..nv {
            let m = mult[k];
            u_out[k] = if m > 0.0 { u[k] + self.xt[k] - v_out[k] } else { 0.0 };
            p2 += m * (self.x[k] - v_out[k]).powi(2);
            d2 += m * (v_out[k] - v[k]).powi(2);
            xn += m * self.x[k] * self.x[k];
            vn += m * v_out[k] * v_out[k];
            un += m * u_out[k] * u_out[k];
        }
        let (mut sn, mut ln) = (0.0, 0.0);
        for i in 0..nr {
            lam_out[i] = lam[i] + self.yt[i] - self.sv_new[i];
            p2 += (self.y[i] - self.sv_new[i]).powi(2);
            d2 += (self.sv_new[i] - self.sv[i]).powi(2);
            sn += self.sv_new[i] * self.sv_new[i];
            ln += lam_out[i] * lam_out[i];
        }
        StepInfo {
            r_pri: p2.sqrt(),
            r_dual: rho * d2.sqrt(),
            scale_p: xn.sqrt().max(vn.sqrt()).max(sn.sqrt()),
            scale_d: rho * (un + ln).sqrt(),
        }
    }

    fn objective_at_new(&self) -> f64 {
        self.problem
            .terms
            .iter()
            .enumerate()
            .map(|(k, t)| {
                t.kind.eval(
                    t.weight,
                    &self.sv_new[self.rows.term_start[k]..self.rows.term_start[k + 1]],
                )
            })
            .sum()
    }
}

/// Makes the final iterate feasible while keeping it PSD: anchored diagonal
/// entries zero their whole row and column, identity-valued diagonal blocks
/// are restored by the congruence `X ← B X B` with `B = blockdiag(Xᵢᵢ^{-1/2})`,
/// and anything else is overwritten.
fn restore_feasibility(problem: &ConicProblem, x: &mut DMatrix<f64>) {
    if problem.cone == Cone::Psd {
        for &(r, c) in &problem.anchor_zeros {
            if r == c {
                x.row_mut(r).fill(0.0);
                x.column_mut(r).fill(0.0);
            }
        }
        let mut scale = DMatrix::<f64>::identity(problem.dim, problem.dim);
        let mut any = false;
        for b in &problem.fixed_blocks {
            let k = b.value.nrows();
            if b.row != b.col || b.value != DMatrix::identity(k, k) {
                continue;
            }
            let block = x.view((b.row, b.row), (k, k)).into_owned();
            let eig = ((&block + block.transpose()) * 0.5).symmetric_eigen();
            if eig.eigenvalues.min() <= 0.0 {
                continue;
            }
            let inv_sqrt = &eig.eigenvectors
                * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
                * eig.eigenvectors.transpose();
            scale.view_mut((b.row, b.row), (k, k)).copy_from(&inv_sqrt);
            any = true;
        }
        if any {
            *x = &scale * &*x * &scale;
            *x = (&*x + x.transpose()) * 0.5;
        }
    }
    problem.apply_constraints(x);
}

/// Runs ADMM on `problem`. Never fails: hitting `max_iter` is reported with
/// `converged = false` and the final residuals.
/// Smallest residual scale used for balancing, relative to the larger one.
const SCALE_FLOOR: f64 = 1e-2;

pub fn solve(problem: &ConicProblem, opts: &SolveOptions) -> SolveReport {
    let mut engine = Engine::new(problem, opts.relaxation);
    let mut z = engine.initial_state();
    let mut t = vec![0.0; z.len()];
    let mut rho = opts.rho;
    let mut history = Vec::new();
    let (mut r_pri, mut r_dual) = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;
    let mut iterations = 0;
    let mut last_adapt = 0;
    let mut interval = opts.adapt_interval;
    let mut last_factor = 1.0;

    for it in 1..=opts.max_iter {
        iterations = it;
        let info = engine.apply(&z, rho, &mut t);
        r_pri = info.r_pri;
        r_dual = info.r_dual;
        if opts.record_history {
            history.push(IterRecord {
                iter: it,
                objective: engine.objective_at_new(),
                primal_res: r_pri,
                dual_res: r_dual,
                rho,
            });
        }
        if r_pri <= opts.eps_abs + opts.eps_rel * info.scale_p
            && r_dual <= opts.eps_abs + opts.eps_rel * info.scale_d
        {
            converged = true;
            break;
        }

        if opts.adaptive_rho && it - last_adapt >= interval {
            // relative residuals; a vanishing scale is floored against the other
            let floor = SCALE_FLOOR * info.scale_p.max(info.scale_d).max(f64::MIN_POSITIVE);
            let rp = info.r_pri / info.scale_p.max(floor);
            let rd = info.r_dual / info.scale_d.max(floor);
            let factor = if rp > opts.adapt_ratio * rd {
                2.0
            } else if rd > opts.adapt_ratio * rp {
                0.5
            } else {
                1.0
            };
            if factor != 1.0 {
                rho *= factor;
                let nv = engine.layout.len();
                t[nv..].iter_mut().for_each(|a| *a /= factor);
                last_adapt = it;
                // back off when the balancing reverses direction
                if factor * last_factor == 1.0 {
                    interval *= 2;
                }
                last_factor = factor;
            }
        }
        std::mem::swap(&mut z, &mut t);
    }

    let mut x_hat = engine.layout.to_matrix(&engine.x);
    restore_feasibility(problem, &mut x_hat);
    let eigenvalues = match problem.cone {
        Cone::Psd => symmetric_eigenvalues(&x_hat),
        Cone::Free => Vec::new(),
    };
    SolveReport {
        objective: problem.objective(&x_hat),
        x_hat,
        iterations,
        primal_residual: r_pri,
        dual_residual: r_dual,
        eigenvalues,
        converged,
        history,
    }
}
