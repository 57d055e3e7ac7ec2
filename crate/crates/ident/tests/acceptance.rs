//! Acceptance suite: one pass/fail line per criterion, nonzero exit when
//! any criterion fails.

use ident::replicate::{median, table1, table2, table3, table4, varying_runs, Benchmark, RunSummary, SeedStats};
use ident_core::denoise::{lsma_smooth, mls_smooth, SmootherConfig};
use ident_core::dictionary::Dictionary;
use ident_core::grid::{standard_normals, Boundary, Field, Grid};
use ident_core::pipeline::{PipelineConfig, PipelineKind};
use ident_core::select::{rr_select, tee};
use ident_core::simulate::{simulate_reference, InitialCondition, Pde, PdeSpec, Scheme};
use ident_core::sparse::{
    group_subspace_pursuit, lasso_matrix, least_squares_on_support, soft_threshold, subspace_pursuit,
};
use ident_core::system::{assemble_differential, assemble_weak, column_normalize, LinearSystem, TestFunction};
use ident_core::varying::{caslr, patch_ranges, split_by_patches, GroupSystem};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;
type Profile<'a> = dyn Fn(f64, f64) -> f64 + 'a;

struct Suite {
    failures: usize,
    filter: Option<String>,
}

impl Suite {
    fn run(&mut self, name: &str, f: impl FnOnce() -> Outcome) {
        if self.filter.as_ref().is_some_and(|p| !name.contains(p.as_str())) {
            return;
        }
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        match out {
            Ok(detail) => println!("PASS {name}: {detail} ({secs:.1} s)"),
            Err(detail) => {
                self.failures += 1;
                println!("FAIL {name}: {detail} ({secs:.1} s)");
            }
        }
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    format!("error: {e}")
}

fn timed<T>(f: impl FnOnce() -> Result<T, String>) -> Result<(T, Duration), String> {
    let start = Instant::now();
    let v = f()?;
    Ok((v, start.elapsed()))
}

fn relative(value: f64, target: f64) -> f64 {
    ((value - target) / target).abs()
}

fn coefficient_within(run: &RunSummary, truth: &[(String, f64)], tol: f64) -> bool {
    truth
        .iter()
        .all(|(l, c)| run.coefficient(l).is_some_and(|v| relative(v, *c) <= tol))
}

// ---------------------------------------------------------------- 1

fn burgers_ident() -> Outcome {
    let (t, took) = timed(|| table1(20).map_err(err))?;
    let c = t.clean.coefficient("u*u_x").unwrap_or(f64::NAN);
    let clean_ok = t.clean.exact_support && (-1.05..=-0.95).contains(&c);
    let raw_wrong = t.raw.runs.len() - t.raw.exact;
    let detail = format!(
        "clean {:?} c={c:.4}; raw 8% wrong support {raw_wrong}/20; LSMA 8% exact {}/20; {:.0} s",
        t.clean.terms.iter().map(|x| &x.0).collect::<Vec<_>>(),
        t.lsma.exact,
        took.as_secs_f64()
    );
    check(
        clean_ok && raw_wrong >= 10 && t.lsma.exact >= 16 && took < Duration::from_secs(120),
        detail,
    )
}

// ---------------------------------------------------------------- 2

fn nsr_values() -> Outcome {
    let t = table2().map_err(err)?;
    let at = |pts: &[(f64, f64)], p: f64| pts.iter().find(|x| x.0 == p).map_or(f64::NAN, |x| x.1);
    let b4 = at(&t.burgers.points, 4.0);
    let v = at(&t.viscous_burgers.points, 0.02);
    let upward: Vec<f64> = t.burgers.points.iter().filter(|x| x.0 >= 4.0).map(|x| x.1).collect();
    let monotone = upward.windows(2).all(|w| w[1] >= w[0]);
    let detail = format!(
        "Burgers 4% NSR {b4:.3} (2.18 +-30%), viscous Burgers 0.02% NSR {v:.3} (2.02 +-30%), monotone from 4%: {monotone}"
    );
    check(
        relative(b4, 2.18) <= 0.3 && relative(v, 2.02) <= 0.3 && monotone,
        detail,
    )
}

// ---------------------------------------------------------------- 3

fn robust_ident() -> Outcome {
    let (t, took) = timed(|| table3(20).map_err(err))?;
    let tr: Vec<f64> = t
        .transport
        .runs
        .iter()
        .map(|r| r.coefficient("u_x").unwrap_or(0.0))
        .collect();
    let tr_med = median(&tr);
    let vb = &t.viscous_burgers;
    let detail = format!(
        "transport 30%: exact {}/20, median u_x {tr_med:.4}; viscous Burgers 5%: exact {}/20, median e_c {:.4}; {:.0} s",
        t.transport.exact,
        vb.exact,
        vb.median_e_c,
        took.as_secs_f64()
    );
    check(
        t.transport.exact > 10
            && relative(tr_med, -1.0) <= 0.15
            && vb.exact > 10
            && vb.median_e_c < 0.05
            && took < Duration::from_secs(300),
        detail,
    )
}

// ---------------------------------------------------------------- 4

fn weak_ident() -> Outcome {
    let t = table4(20).map_err(err)?;
    let td_truth = Pde::TransportDiffusion.true_support();
    let td: &SeedStats = &t.transport_diffusion;
    let td_ok = td
        .runs
        .iter()
        .filter(|r| r.exact_support && coefficient_within(r, &td_truth, 0.10))
        .count();
    let kdv_ok = t.kdv.exact_support && coefficient_within(&t.kdv, &Pde::KdV.true_support(), 0.05);
    let detail = format!(
        "transport-diffusion NSR 0.5: exact within 10% {td_ok}/20 (median e_c {:.4}); KdV clean {:?}",
        td.median_e_c, t.kdv.terms
    );
    check(td_ok == td.runs.len() && kdv_ok, detail)
}

// ---------------------------------------------------------------- 5

/// Deterministic pseudo-random permutation from seeded normals.
fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let z = standard_normals(n, seed);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| z[a].total_cmp(&z[b]));
    idx
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..n {
            cur.push(j);
            rec(j + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Residual norm of the least-squares fit on `cols`, via SVD.
fn ls_residual(a: &DMatrix<f64>, b: &DVector<f64>, cols: &[usize]) -> f64 {
    let sub = a.select_columns(cols);
    let c = sub.clone().svd(true, true).solve(b, 1e-12).expect("svd solve");
    (b - sub * c).norm()
}

fn condition(a: &DMatrix<f64>) -> f64 {
    let s = a.clone().singular_values();
    s.max() / s.min()
}

fn random_system(rows: usize, cols: usize, k_cols: &[usize], seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let z = standard_normals(rows * cols + rows + cols, seed);
    let a = DMatrix::from_column_slice(rows, cols, &z[..rows * cols]);
    let mut c = DVector::zeros(cols);
    for &j in k_cols {
        let v = z[rows * cols + rows + j];
        c[j] = v.signum() * (0.5 + v.abs());
    }
    let clean = &a * &c;
    let scale = 0.1 * clean.norm() / (rows as f64).sqrt();
    let noise = DVector::from_column_slice(&z[rows * cols..rows * cols + rows]) * scale;
    (a, clean + noise)
}

fn sp_vs_exhaustive() -> Outcome {
    let (mut tried, mut matched, mut seed) = (0usize, 0usize, 0u64);
    while tried < 200 {
        seed += 1;
        let k = 1 + (seed as usize % 3);
        let support: Vec<usize> = shuffled(10, seed ^ 0xabc)[..k].to_vec();
        let (a, b) = random_system(100, 10, &support, seed);
        if condition(&a) >= 1e3 {
            continue;
        }
        tried += 1;
        let sys = column_normalize(&LinearSystem::from_matrix(a, b).map_err(err)?);
        let sp = subspace_pursuit(&sys, k).map_err(err)?;
        let best = combinations(10, k)
            .into_iter()
            .map(|s| (ls_residual(&sys.matrix, &sys.rhs, &s), s))
            .min_by(|x, y| x.0.total_cmp(&y.0))
            .expect("nonempty");
        if sp.support == best.1 {
            matched += 1;
        }
    }
    check(
        matched * 100 >= 95 * tried,
        format!("SP matched exhaustive best-k support {matched}/{tried}"),
    )
}

fn gpsp_vs_exhaustive() -> Outcome {
    let (groups, size, rows) = (6usize, 4usize, 80usize);
    let (mut ok, total) = (0usize, 200u64);
    for seed in 0..total {
        let k = 1 + (seed as usize % 3);
        let chosen = shuffled(groups, seed ^ 0x5eed)[..k].to_vec();
        let cols: Vec<usize> = chosen.iter().flat_map(|g| g * size..(g + 1) * size).collect();
        let (a, b) = random_system(rows, groups * size, &cols, 10_000 + seed);
        let gsys = GroupSystem::from_blocks(a.clone(), b.clone(), &vec![size; groups]).map_err(err)?;
        let model = group_subspace_pursuit(&gsys, k).map_err(err)?;
        let best = combinations(groups, k)
            .into_iter()
            .map(|gs| {
                let c: Vec<usize> = gs.iter().flat_map(|g| g * size..(g + 1) * size).collect();
                ls_residual(&a, &b, &c)
            })
            .fold(f64::INFINITY, f64::min);
        if model.residual <= 1.01 * best {
            ok += 1;
        }
    }
    check(
        ok * 100 >= 90 * total as usize,
        format!("GPSP residual within 1.01x of exhaustive {ok}/{total}"),
    )
}

// ---------------------------------------------------------------- 6

/// `d^a/ds^a [(1 - s)^p (1 + s)^p]` by the Leibniz rule.
fn bump_ds(s: f64, p: u32, a: usize) -> f64 {
    let falling = |j: usize| -> f64 { (0..j).map(|i| (p as usize - i) as f64).product() };
    let binom = |n: usize, k: usize| -> f64 { (0..k).map(|i| (n - i) as f64 / (i + 1) as f64).product() };
    (0..=a)
        .filter(|&j| j <= p as usize && a - j <= p as usize)
        .map(|j| {
            let left = if j % 2 == 0 { 1.0 } else { -1.0 } * falling(j) * (1.0 - s).powi((p as usize - j) as i32);
            let right = falling(a - j) * (1.0 + s).powi((p as usize - (a - j)) as i32);
            binom(a, j) * left * right
        })
        .sum()
}

/// Normalized one-axis kernel and its `order`-th derivative on offsets `-m..=m`.
fn kernel(m: usize, p: u32, order: usize, h: f64) -> Vec<f64> {
    let s = |o: usize| (o as f64 - m as f64) / m as f64;
    let norm: f64 = (0..=2 * m).map(|o| bump_ds(s(o), p, 0)).sum::<f64>() * h;
    let scale = (m as f64 * h).powi(-(order as i32));
    (0..=2 * m).map(|o| bump_ds(s(o), p, order) * scale / norm).collect()
}

/// `sum v(x_i, t_n) kx kt dx dt` around center `(ic, nc)` with periodic x.
fn quadrature(g: &Grid, v: impl Fn(usize, usize) -> f64, ic: usize, nc: usize, kx: &[f64], kt: &[f64]) -> f64 {
    let (mx, mt) = ((kx.len() - 1) / 2, (kt.len() - 1) / 2);
    let mut acc = 0.0;
    for (q, wt) in kt.iter().enumerate() {
        let n = nc + q - mt;
        for (o, wx) in kx.iter().enumerate() {
            let i = (ic + g.nx + o - mx) % g.nx;
            acc += v(i, n) * wx * wt;
        }
    }
    acc * g.dx * g.dt
}

fn weak_dictionary() -> Result<Dictionary, String> {
    Dictionary::build(PipelineConfig::for_kind(PipelineKind::WeakIdent).dictionary).map_err(err)
}

fn fft_vs_direct() -> Outcome {
    let g = Grid::on_interval(0.0, 1.0, 32, 1.0, 32, Boundary::Periodic).map_err(err)?;
    let u = Field::from_fn(g, |x, t| {
        (2.0 * PI * x).sin() * (1.0 + 0.3 * t) + 0.4 * (4.0 * PI * x + t).cos()
    })
    .map_err(err)?;
    let dict = weak_dictionary()?;
    let phi = TestFunction {
        mx: 6,
        mt: 5,
        px: 6,
        pt: 4,
    };
    let sys = assemble_weak(&u, &dict, &phi, (1, 1)).map_err(err)?;
    let mut worst = 0.0f64;
    for (k, term) in dict.terms().iter().enumerate() {
        let (a, b, f) = term.weak_equivalent().ok_or("term without weak form")?;
        let kx = kernel(phi.mx, phi.px, a, g.dx);
        let kt = kernel(phi.mt, phi.pt, 0, g.dt);
        let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
        for (r, row) in sys.rows.iter().enumerate() {
            let direct = f * sign * quadrature(&g, |i, n| u.get(i, n).powi(b as i32), row.i, row.n, &kx, &kt);
            worst = worst.max((direct - sys.matrix[(r, k)]).abs());
        }
    }
    let kx = kernel(phi.mx, phi.px, 0, g.dx);
    let kt = kernel(phi.mt, phi.pt, 1, g.dt);
    for (r, row) in sys.rows.iter().enumerate() {
        let direct = -quadrature(&g, |i, n| u.get(i, n), row.i, row.n, &kx, &kt);
        worst = worst.max((direct - sys.rhs[r]).abs());
    }
    check(
        worst <= 1e-8,
        format!("max |FFT - direct| = {worst:.2e} over {} rows", sys.nrows()),
    )
}

fn integration_by_parts() -> Outcome {
    let (nx, nt) = (256, 201);
    let g = Grid::on_interval(0.0, 1.0, nx, 1.0, nt, Boundary::Periodic).map_err(err)?;
    let w = 2.0 * PI;
    let u_f = |x: f64, t: f64| (w * (x - t)).sin() + 0.5 * (2.0 * w * x + t).cos();
    let ux = |x: f64, t: f64| w * (w * (x - t)).cos() - w * (2.0 * w * x + t).sin();
    let uxx = |x: f64, t: f64| -w * w * (w * (x - t)).sin() - 2.0 * w * w * (2.0 * w * x + t).cos();
    let ut = |x: f64, t: f64| -w * (w * (x - t)).cos() - 0.5 * (2.0 * w * x + t).sin();
    let u = Field::from_fn(g, u_f).map_err(err)?;
    let dict = weak_dictionary()?;
    let phi = TestFunction {
        mx: 40,
        mt: 40,
        px: 10,
        pt: 10,
    };
    let sys = assemble_weak(&u, &dict, &phi, (8, 8)).map_err(err)?;
    let kx = kernel(phi.mx, phi.px, 0, g.dx);
    let kt = kernel(phi.mt, phi.pt, 0, g.dt);
    let strong = |h: &Profile<'_>, ic: usize, nc: usize| quadrature(&g, |i, n| h(g.x(i), g.t(n)), ic, nc, &kx, &kt);
    let uux = |x: f64, t: f64| u_f(x, t) * ux(x, t);
    let cases: [(&str, &Profile<'_>); 3] = [("u_x", &ux), ("u_xx", &uxx), ("u*u_x", &uux)];
    let mut worst = 0.0f64;
    for (label, h) in cases {
        let k = sys
            .column_of(label)
            .ok_or(format!("{label} missing from the weak dictionary"))?;
        for (r, row) in sys.rows.iter().enumerate() {
            worst = worst.max((strong(h, row.i, row.n) - sys.matrix[(r, k)]).abs());
        }
    }
    for (r, row) in sys.rows.iter().enumerate() {
        worst = worst.max((strong(&ut, row.i, row.n) - sys.rhs[r]).abs());
    }
    check(
        worst <= 1e-6,
        format!("max |weak - strong quadrature| = {worst:.2e} for u_x, u_xx, u*u_x, u_t"),
    )
}

fn smoother_exactness() -> Outcome {
    let n = 60;
    let h = 0.05;
    let q: Vec<f64> = (0..n)
        .map(|i| {
            let x = i as f64 * h;
            1.5 - 2.0 * x + 0.7 * x * x
        })
        .collect();
    let cubic: Vec<f64> = (0..n)
        .map(|i| {
            let x = i as f64 * h;
            0.3 + 1.1 * x - 0.4 * x * x * x
        })
        .collect();
    let lsma = lsma_smooth(&q, h).map_err(err)?;
    let mls = mls_smooth(&q, h, &SmootherConfig::mls(Some(4.0 * h), 2)).map_err(err)?;
    let mls3 = mls_smooth(&cubic, h, &SmootherConfig::mls(Some(5.0 * h), 3)).map_err(err)?;
    let dev = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let (e1, e2, e3) = (dev(&lsma, &q), dev(&mls, &q), dev(&mls3, &cubic));
    check(
        e1 <= 1e-8 && e2 <= 1e-8 && e3 <= 1e-8,
        format!("LSMA quadratic {e1:.1e}, MLS-2 quadratic {e2:.1e}, MLS-3 cubic {e3:.1e}"),
    )
}

fn lasso_soft_threshold() -> Outcome {
    let (rows, cols) = (40, 6);
    let z = standard_normals(rows * cols + rows, 77);
    let a = DMatrix::from_column_slice(rows, cols, &z[..rows * cols]);
    let q = a.qr().q();
    let b = DVector::from_column_slice(&z[rows * cols..]) * 2.0;
    let qtb = q.tr_mul(&b);
    let mut worst = 0.0f64;
    for lambda in [0.0, 0.3, 1.0, 2.5] {
        let res = lasso_matrix(&q, &b, lambda, 1e-14, 100_000).map_err(err)?;
        for (c, v) in res.coeffs.iter().zip(qtb.iter()) {
            worst = worst.max((c - soft_threshold(*v, lambda)).abs());
        }
    }
    check(
        worst <= 1e-6,
        format!("max deviation from soft-thresholded Q^T b = {worst:.1e}"),
    )
}

// ---------------------------------------------------------------- 7

/// Fraction of runs where the exact model has a lower TEE than every
/// one-term addition or removal refit by least squares.
fn tee_family(
    pde: Pde,
    periodic: bool,
    nx: usize,
    t_final: f64,
    fine_div: f64,
    scheme: Scheme,
) -> Result<usize, String> {
    let b = if periodic {
        Boundary::Periodic
    } else {
        Boundary::Dirichlet
    };
    let g = Grid::on_interval(0.0, 1.0, nx, t_final, 51, b).map_err(err)?;
    let dict = Dictionary::build(PipelineConfig::for_kind(PipelineKind::Ident).dictionary).map_err(err)?;
    let truth = pde.true_support();
    let mut wins = 0;
    for seed in 0..20u64 {
        let t = (seed as f64 * 0.618034).fract();
        let modes = if periodic {
            vec![(1.0, 1.0, 6.0 * t), (0.3 + 0.4 * t, 2.0, 1.0)]
        } else {
            vec![(1.0, 1.0, 0.0), (0.2 + 0.4 * t, 1.5, 0.0)]
        };
        let u = simulate_reference(pde, &g, &InitialCondition::Modes { modes }, 10).map_err(err)?;
        let sys = column_normalize(&assemble_differential(&u, &dict, &SmootherConfig::identity()).map_err(err)?);
        let tcols: Vec<usize> = truth.iter().filter_map(|(l, _)| sys.column_of(l)).collect();
        let mut exact = vec![0.0; dict.len()];
        for (l, c) in &truth {
            exact[dict.index_of(l).ok_or("true term missing")?] = *c;
        }
        let start = u.slice(0).to_vec();
        let score = |c: Vec<f64>| -> Result<f64, String> {
            let spec = PdeSpec::new(dict.clone(), c, g, scheme).map_err(err)?;
            tee(&spec, &u, &start, g.dt / fine_div).map_err(err)
        };
        let e0 = score(exact)?;
        let mut beaten = false;
        for j in 0..sys.ncols() {
            let mut s = tcols.clone();
            match s.iter().position(|&x| x == j) {
                Some(p) => {
                    s.remove(p);
                    if s.is_empty() {
                        continue;
                    }
                }
                None => {
                    s.push(j);
                    s.sort_unstable();
                }
            }
            let m = least_squares_on_support(&sys, &s).map_err(err)?;
            if score(m.dictionary_coeffs(&sys))? <= e0 {
                beaten = true;
                break;
            }
        }
        wins += usize::from(!beaten);
    }
    Ok(wins)
}

fn tee_ranks_exact_first() -> Outcome {
    let burgers = tee_family(Pde::Burgers, false, 101, 0.05, 1000.0, Scheme::ForwardEulerFD)?;
    let transport = tee_family(Pde::Transport, true, 96, 0.5, 100.0, Scheme::ForwardEulerSpectral)?;
    check(
        burgers == 20 && transport == 20,
        format!("exact model ranked first: Burgers {burgers}/20, transport {transport}/20"),
    )
}

/// `R_k` with `k_true` informative terms over a residual floor, then a
/// plateau decreasing by `eps` per extra term.
fn constructed_residuals(k_true: usize, floor: f64, eps: f64, decreasing: bool) -> Vec<f64> {
    let nf = k_true + 10;
    let w = |j: usize| if decreasing { 1.0 / j as f64 } else { 1.0 };
    (1..=nf)
        .map(|k| {
            if k <= k_true {
                floor + (k + 1..=k_true).map(w).sum::<f64>()
            } else {
                floor * (1.0 - eps * (k - k_true) as f64)
            }
        })
        .collect()
}

fn rr_recovers_sparsity() -> Outcome {
    let mut total = 0;
    let mut failed = Vec::new();
    for k_true in 1..=6 {
        for floor in [0.01, 0.5] {
            for eps in [0.0, 1e-3] {
                for decreasing in [false, true] {
                    total += 1;
                    let r = constructed_residuals(k_true, floor, eps, decreasing);
                    let choice = rr_select(&r, 5, 0.015).map_err(err)?;
                    if choice.k != k_true || choice.fallback {
                        failed.push((k_true, floor, eps, decreasing, choice.k));
                    }
                }
            }
        }
    }
    check(
        failed.is_empty(),
        format!(
            "{}/{total} constructed cases recovered; misses {failed:?}",
            total - failed.len()
        ),
    )
}

fn rrc_recovers_l() -> Outcome {
    let g = Grid::on_interval(0.0, 1.0, 96, 0.5, 51, Boundary::Periodic).map_err(err)?;
    let ic = InitialCondition::Modes {
        modes: vec![(1.0, 1.0, 0.0), (0.6, 2.0, 1.0), (0.4, 3.0, 2.0), (0.25, 5.0, 0.5)],
    };
    let u = simulate_reference(Pde::TransportDiffusion, &g, &ic, 10).map_err(err)?;
    let cfg = PipelineConfig::for_kind(PipelineKind::Caslr);
    let dict = Dictionary::build(cfg.dictionary).map_err(err)?;
    let raw = assemble_differential(&u, &dict, &SmootherConfig::identity()).map_err(err)?;
    let (j1, j2) = (
        raw.column_of("u_x").ok_or("u_x missing")?,
        raw.column_of("u_xx").ok_or("u_xx missing")?,
    );
    let clean: Vec<f64> = raw
        .rows
        .iter()
        .enumerate()
        .map(|(r, m)| {
            let a1 = -(1.0 + 0.5 * (2.0 * PI * m.x).sin());
            let a2 = 0.05 * (1.0 + 0.3 * (2.0 * PI * m.x).cos());
            a1 * raw.matrix[(r, j1)] + a2 * raw.matrix[(r, j2)]
        })
        .collect();
    let rms = (clean.iter().map(|v| v * v).sum::<f64>() / clean.len() as f64).sqrt();
    let ranges = patch_ranges(g.nx, 12, cfg.patch_overlap).map_err(err)?;
    let mut ok = 0;
    for seed in 0..20u64 {
        let z = standard_normals(clean.len(), seed);
        let mut sys = raw.clone();
        for (r, v) in clean.iter().enumerate() {
            sys.rhs[r] = v + 0.01 * rms * z[r];
        }
        let sys = column_normalize(&sys);
        let res = caslr(&split_by_patches(&sys, &ranges), None).map_err(err)?;
        let mut support = res.best().support.clone();
        support.sort_unstable();
        let want = {
            let mut w = vec![sys.column_of("u_x").ok_or("u_x")?, sys.column_of("u_xx").ok_or("u_xx")?];
            w.sort_unstable();
            w
        };
        ok += usize::from(res.chosen == 2 && support == want);
    }
    check(ok >= 18, format!("l* = 2 with support {{u_x, u_xx}} in {ok}/20 runs"))
}

// ---------------------------------------------------------------- 8

fn gp_ident() -> Outcome {
    let (runs, took) = timed(|| varying_runs(&Benchmark::varying_advection(), 20).map_err(err))?;
    let jac = median(&runs.iter().map(|r| r.jaccard).collect::<Vec<_>>());
    let l2 = median(
        &runs
            .iter()
            .map(|r| r.l2_error.unwrap_or(f64::INFINITY))
            .collect::<Vec<_>>(),
    );
    check(
        jac == 1.0 && l2 < 0.15 && took < Duration::from_secs(600),
        format!(
            "median Jaccard {jac:.3}, median L2 error {l2:.4}; {:.0} s",
            took.as_secs_f64()
        ),
    )
}

fn main() -> ExitCode {
    // An optional non-flag argument restricts the run to matching criteria.
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut suite = Suite { failures: 0, filter };
    suite.run("C1 Burgers IDENT with and without LSMA", burgers_ident);
    suite.run("C2 noise-to-signal ratios", nsr_values);
    suite.run("C3 robust IDENT", robust_ident);
    suite.run("C4 weak-form identification", weak_ident);
    suite.run("C5a subspace pursuit vs exhaustive", sp_vs_exhaustive);
    suite.run("C5b group subspace pursuit vs exhaustive", gpsp_vs_exhaustive);
    suite.run("C6a FFT weak assembly vs direct quadrature", fft_vs_direct);
    suite.run("C6b integration by parts", integration_by_parts);
    suite.run("C6c smoother polynomial exactness", smoother_exactness);
    suite.run("C6d LASSO on orthonormal design", lasso_soft_threshold);
    suite.run("C7a TEE ranks the exact model first", tee_ranks_exact_first);
    suite.run("C7b reduction-in-residual sparsity", rr_recovers_sparsity);
    suite.run("C7c RRC patch-count recovery", rrc_recovers_l);
    suite.run("C8 GP-IDENT varying advection", gp_ident);
    if suite.failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria failed", suite.failures);
        ExitCode::FAILURE
    }
}
