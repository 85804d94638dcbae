#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

pub fn ceitr() -> &'static str {
    env!("CARGO_BIN_EXE_ceitr")
}

pub fn scratch_dir(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("ceitr-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

pub fn run(args: &[&str]) -> Result<(), String> {
    let out = Command::new(ceitr()).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("ceitr {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
    }
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

/// Runs every subcommand into `dir`, returning the produced files.
pub fn run_all_commands(dir: &Path) -> Result<Vec<PathBuf>, String> {
    let cohort = p(dir, "cohort.csv");
    let small = ["--trees", "5", "--mtry-folds", "3"];
    run(&["simulate", "--out", &cohort, "--potentials", &p(dir, "potentials.csv"), "--n", "300", "--censor-rate", "0.2", "--intervals", "10", "--seed", "11"])?;
    run(&["weights", "--cohort", &cohort, "--method", "aipw-p", "--out", &p(dir, "weights.csv")])?;
    let mut fit = vec!["fit", "--cohort", &cohort, "--method", "CRF-AIPW-P", "--seed", "3"];
    let forest = p(dir, "forest.json");
    fit.extend(["--out", &forest]);
    fit.extend(small);
    run(&fit)?;
    let tree = p(dir, "tree.json");
    run(&["fit", "--cohort", &cohort, "--method", "DT-IPW-P", "--seed", "3", "--out", &tree])?;
    run(&["predict", "--rule", &forest, "--cohort", &cohort, "--out", &p(dir, "labels.csv")])?;
    run(&["boundary", "--rule", &tree, "--cohort", &cohort, "--resolution", "21", "--out", &p(dir, "boundary.csv")])?;
    let mut bench = vec![
        "benchmark", "--seed", "5", "--reps", "2", "--n", "200", "--em-modes", "EM-TM", "--hte-modes", "small", "--wtp", "50000",
        "--censor-rates", "0,0.5", "--methods", "Reg-naive,DT-AIPW-P,CRF-AIPW-P", "--intervals", "10",
    ];
    let results = p(dir, "benchmark.csv");
    bench.extend(["--out", &results]);
    bench.extend(small);
    run(&bench)?;
    let mut analyze = vec![
        "analyze", "--cohort", &cohort, "--method", "CRF-AIPW-P", "--folds", "3", "--bootstrap", "20", "--fast-bootstrap", "--seed", "9",
    ];
    let report = p(dir, "report.csv");
    let summary = p(dir, "summary.txt");
    let oof = p(dir, "oof.csv");
    analyze.extend(["--out", &report, "--summary", &summary, "--labels", &oof]);
    analyze.extend(small);
    run(&analyze)?;
    let mut imp = vec!["importance", "--cohort", &cohort, "--method", "CRF-IPW-P", "--repeats", "2", "--seed", "4"];
    let imp_out = p(dir, "importance.csv");
    imp.extend(["--out", &imp_out]);
    imp.extend(small);
    run(&imp)?;
    let names = [
        "cohort.csv", "potentials.csv", "weights.csv", "forest.json", "tree.json", "labels.csv", "boundary.csv", "benchmark.csv",
        "report.csv", "summary.txt", "oof.csv", "importance.csv",
    ];
    Ok(names.iter().map(|n| dir.join(n)).collect())
}

/// Two full runs in separate directories; the mismatching files, if any.
pub fn determinism_mismatches() -> Result<Vec<String>, String> {
    let a = scratch_dir("det-a");
    let b = scratch_dir("det-b");
    let fa = run_all_commands(&a)?;
    let fb = run_all_commands(&b)?;
    let mut bad = Vec::new();
    for (x, y) in fa.iter().zip(&fb) {
        let bx = std::fs::read(x).map_err(|e| format!("{}: {e}", x.display()))?;
        let by = std::fs::read(y).map_err(|e| format!("{}: {e}", y.display()))?;
        if bx != by || bx.is_empty() {
            bad.push(x.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    let _ = std::fs::remove_dir_all(&a);
    let _ = std::fs::remove_dir_all(&b);
    Ok(bad)
}

fn gini(w0: f64, w1: f64) -> f64 {
    let t = w0 + w1;
    if t > 0.0 { t * (1.0 - (w0 / t).powi(2) - (w1 / t).powi(2)) } else { 0.0 }
}

/// Best root split by exhaustive search over features and midpoints:
/// `(feature, threshold, gain)`, first maximum kept.
pub fn brute_force_root(x: &[Vec<f64>], z: &[u8], w: &[f64]) -> Option<(usize, f64, f64)> {
    let n = x.len();
    let node = |side: &dyn Fn(usize) -> bool| {
        let mut s = [0.0; 2];
        for i in 0..n {
            if side(i) {
                s[z[i] as usize] += w[i];
            }
        }
        gini(s[0], s[1])
    };
    let parent = node(&|_| true);
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x[0].len() {
        let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for k in 0..vals.len().saturating_sub(1) {
            let s = 0.5 * (vals[k] + vals[k + 1]);
            let gain = parent - node(&|i| x[i][f] <= s) - node(&|i| x[i][f] > s);
            if best.is_none_or(|b| gain > b.2 + 1e-12) {
                best = Some((f, s, gain));
            }
        }
    }
    best
}

/// Mean and variance of `sum x_i z_pi(i)` over all permutations of the
/// frequency-expanded sample.
pub fn enumerate_moments(x: &[f64], z: &[f64], w: &[usize]) -> (f64, f64) {
    let xs: Vec<f64> = x.iter().zip(w).flat_map(|(&v, &c)| std::iter::repeat_n(v, c)).collect();
    let zs: Vec<f64> = z.iter().zip(w).flat_map(|(&v, &c)| std::iter::repeat_n(v, c)).collect();
    let n = xs.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let (mut s1, mut s2, mut cnt) = (0.0, 0.0, 0.0);
    fn heap(k: usize, p: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if k == 1 {
            f(p);
            return;
        }
        heap(k - 1, p, f);
        for i in 0..k - 1 {
            if k % 2 == 0 { p.swap(i, k - 1) } else { p.swap(0, k - 1) }
            heap(k - 1, p, f);
        }
    }
    heap(n, &mut perm, &mut |p: &[usize]| {
        let t: f64 = (0..n).map(|i| xs[i] * zs[p[i]]).sum();
        s1 += t;
        s2 += t * t;
        cnt += 1.0;
    });
    let m = s1 / cnt;
    (m, s2 / cnt - m * m)
}
