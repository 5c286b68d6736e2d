//! Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any fails.

#[path = "../../core/tests/support/props.rs"]
mod props;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use gifs_cli::pipeline::available_stages;
use gifs_cli::{parse_config, run_pipeline, Input, Outcome, PipelineConfig, Stage};
use gifs_core::algebra::{parse_rational, QPoly};
use gifs_core::dimension::{char_poly, incidence_matrix, rational_roots, spectral_radius, IncidenceMatrix};
use gifs_core::gifsbuild::{validate_gifs, GifsSystem};
use gifs_core::reduce::{flag_degenerate, language_included};
use gifs_core::render::{hausdorff_distance, ifs_system, point_cloud};

const CONFIGS: [&str; 8] = [
    "golden_triangle",
    "small_graph",
    "square_2i",
    "square_2i_reversed",
    "hexagon",
    "pisot_tile",
    "pisot_tile_asym",
    "ngai_wang",
];

struct Run {
    cfg: PipelineConfig,
    outcome: Outcome,
    elapsed: Duration,
}

/// Runs every config once, rendering included, and keeps the outcomes.
struct Runs {
    out: PathBuf,
    runs: BTreeMap<&'static str, Run>,
}

impl Runs {
    fn new(out: &Path) -> Self {
        Runs {
            out: out.to_path_buf(),
            runs: BTreeMap::new(),
        }
    }

    fn get(&mut self, name: &'static str) -> Result<&Run, String> {
        if !self.runs.contains_key(name) {
            let run = execute(name, &self.out.join(name))?;
            self.runs.insert(name, run);
        }
        Ok(&self.runs[name])
    }
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(format!("{name}.json"))
}

fn execute(name: &str, out: &Path) -> Result<Run, String> {
    let cfg = parse_config(&config_path(name)).map_err(|e| format!("{name}: {e}"))?;
    let stages: Vec<Stage> = available_stages(&cfg.input);
    let start = Instant::now();
    let outcome = run_pipeline(&cfg, &stages, out).map_err(|e| format!("{name}: {e}"))?;
    Ok(Run {
        cfg,
        outcome,
        elapsed: start.elapsed(),
    })
}

/// Accumulates the failed conditions of one criterion.
#[derive(Default)]
struct Check {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Check {
    fn that(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    fn within(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        self.note(format!("{label}={got:.10}"));
        self.that(
            (got - want).abs() <= tol,
            format!("{label}={got} not within {tol:e} of {want}"),
        );
    }

    fn runtime(&mut self, run: &Run, limit_s: f64) {
        let s = run.elapsed.as_secs_f64();
        self.note(format!("{:.2}s", s));
        self.that(s < limit_s, format!("runtime {s:.2}s ≥ {limit_s}s"));
    }
}

fn q(s: &str) -> gifs_core::algebra::Rational {
    parse_rational(s).unwrap()
}

fn poly(c: &[i64]) -> QPoly {
    QPoly::from_ints(c.iter().copied())
}

fn reduced(run: &Run) -> Result<&GifsSystem, String> {
    run.outcome.reduced.as_ref().ok_or_else(|| "no reduced system".to_string())
}

fn raw(run: &Run) -> Result<&GifsSystem, String> {
    run.outcome.raw.as_ref().ok_or_else(|| "no raw system".to_string())
}

fn dimension(run: &Run) -> Result<f64, String> {
    run.outcome.summary.dimension.ok_or_else(|| "no dimension".to_string())
}

fn count(v: Option<usize>) -> usize {
    v.unwrap_or(usize::MAX)
}

/// Whether some renaming of attractors 2..n carries `a` onto `b`.
fn isomorphic(a: &GifsSystem, b: &GifsSystem) -> bool {
    fn search(a: &GifsSystem, b: &GifsSystem, perm: &mut Vec<usize>, used: &mut [bool]) -> bool {
        let n = a.len();
        if perm.len() == n {
            return (0..n).all(|k| {
                let mut lhs: Vec<_> = a.equation(k).iter().map(|t| (t.map, perm[t.target])).collect();
                let mut rhs: Vec<_> = b.equation(perm[k]).iter().map(|t| (t.map, t.target)).collect();
                lhs.sort();
                rhs.sort();
                lhs == rhs
            });
        }
        for c in 1..n {
            if !used[c] {
                used[c] = true;
                perm.push(c);
                if search(a, b, perm, used) {
                    return true;
                }
                perm.pop();
                used[c] = false;
            }
        }
        false
    }
    if a.len() != b.len() || a.map_count() != b.map_count() || a.is_empty() {
        return false;
    }
    let mut used = vec![false; a.len()];
    used[0] = true;
    search(a, b, &mut vec![0], &mut used)
}

/// `p` with every rational root divided out, as often as it occurs.
fn without_rational_roots(p: &QPoly) -> QPoly {
    let mut p = p.clone();
    for r in rational_roots(&p) {
        let lin = QPoly::linear(r);
        while let Some(quot) = p.exact_div(&lin) {
            p = quot;
        }
    }
    p.monic()
}

fn golden_cubic() -> QPoly {
    poly(&[3, 0, -3, 1])
}

fn golden_t() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

fn criterion_1(runs: &mut Runs, c: &mut Check) -> Result<(), String> {
    let run = runs.get("golden_triangle")?;
    let sys = reduced(run)?;
    let expected = GifsSystem::from_pairs(
        3,
        &[
            &[(1, 1), (2, 2), (3, 3)],
            &[(1, 4), (2, 2), (3, 3)],
            &[(1, 4), (2, 5), (3, 3)],
            &[(2, 2), (3, 3)],
            &[(1, 6), (3, 3)],
            &[(2, 5), (3, 3)],
        ],
    )
    .unwrap();
    c.note(format!("{} equations", sys.len()));
    c.that(isomorphic(sys, &expected), "reduced system differs from the six expected equations");
    let p = [[0, 1], [-1, 1], [1, 1]]
        .iter()
        .fold(golden_cubic(), |acc, l| acc.mul(&poly(l)));
    c.that(char_poly(&incidence_matrix(sys)) == p, "char_poly ≠ λ(λ−1)(λ+1)(λ³−3λ²+3)");
    let rho = run.outcome.summary.perron_root.ok_or("no spectral radius")?;
    c.within("ρ", rho, 2.532, 1e-3);
    c.within("β", dimension(run)?, 1.9306, 1e-3);
    c.runtime(run, 5.0);
    Ok(())
}

fn criterion_2(runs: &mut Runs, c: &mut Check) -> Result<(), String> {
    let table: Vec<Vec<_>> = [
        ["1", "1", "0", "0", "0", "0"],
        ["0", "1", "1", "1/2", "0", "0"],
        ["0", "0", "1", "1/2", "1", "0"],
        ["0", "2", "0", "0", "1", "0"],
        ["0", "0", "2", "0", "0", "1/3"],
        ["0", "0", "0", "0", "3", "0"],
    ]
    .iter()
    .map(|row| row.iter().map(|s| q(s)).collect())
    .collect();
    let m = IncidenceMatrix::from_rows(table).map_err(|e| e.to_string())?;
    let table_poly = char_poly(&m);
    let run = runs.get("golden_triangle")?;
    let golden_poly = char_poly(&incidence_matrix(reduced(run)?));
    let common = table_poly.gcd(&golden_poly);
    c.note(format!("gcd degree {}", common.degree().unwrap_or(0)));
    c.that(golden_cubic().divides(&common), "λ³−3λ²+3 is not a common factor");
    let rho = spectral_radius(&m).map_err(|e| e.to_string())?;
    let beta = rho.ln() / -golden_t().ln();
    c.within("β", beta, dimension(run)?, 1e-9);
    Ok(())
}

fn criterion_3(runs: &mut Runs, c: &mut Check) -> Result<(), String> {
    let run = runs.get("small_graph")?;
    let raw = raw(run)?;
    c.note(format!("raw {}", raw.len()));
    c.that(raw.len() == 8, format!("raw build has {} equations, expected 8", raw.len()));
    c.that(raw.len() >= 8 && raw.equation_pairs(3) == [(2, 6)], "B_4 ≠ f_2(B_6)");
    c.that(raw.len() >= 8 && raw.equation_pairs(7) == [(2, 7)], "B_8 ≠ f_2(B_7)");
    let sys = reduced(run)?;
    c.note(format!("reduced {}", sys.len()));
    c.that(sys.len() == 4, format!("reduction gives {} attractors, expected 4", sys.len()));
    c.that(
        sys.len() == 4 && sys.equation_pairs(2) == [(1, 4), (2, 1), (3, 2)],
        "B_3 ≠ f_1(B_4)∪f_2(B_1)∪f_3(B_2)",
    );
    c.that(sys.len() == 4 && sys.equation_pairs(3) == [(2, 3)], "B_4 ≠ f_2(B_3)");
    let og = run.outcome.overlap_graph.as_ref().ok_or("no overlap graph")?;
    let v = |n: &str| og.find_vertex(n).ok_or(format!("no vertex {n}"));
    let (a, b, e) = (v("a")?, v("b")?, v("e")?);
    let incl = |s, t| language_included(og, s, &[t]).map_err(|e| e.to_string());
    c.that(incl(b, e)?, "L_b ⊄ L_e");
    c.that(incl(a, b)? && incl(b, a)?, "L_a ≠ L_b");
    c.runtime(run, 2.0);
    Ok(())
}

fn criterion_4(runs: &mut Runs, c: &mut Check) -> Result<(), String> {
    let quintic = poly(&[2, 4, 9, -2, -4, 1]);
    for (name, want) in [("square_2i", 14), ("square_2i_reversed", 17)] {
        let run = runs.get(name)?;
        let sys = reduced(run)?;
        c.note(format!("{name}: {}", sys.len()));
        c.that(sys.len() == want, format!("{name}: {} attractors, expected {want}", sys.len()));
        c.that(
            quintic.divides(&char_poly(&incidence_matrix(sys))),
            format!("{name}: quintic does not divide char_poly"),
        );
        c.within(&format!("β[{name}]"), dimension(run)?, 1.9364, 1e-3);
        c.runtime(run, 30.0);
    }
    Ok(())
}

fn criterion_5(runs: &mut Runs, c: &mut Check) -> Result<(), String> {
    let run = runs.get("hexagon")?;
    let raw = raw(run)?;
    c.note(format!("raw {}", raw.len()));
    c.that(raw.len() == 18, format!("raw build has {} attractors, expected 18", raw.len()));
    let flags = flag_degenerate(raw).map_err(|e| e.to_string())?.degenerate;
    c.note(format!("flagged {:?}", flags.iter().map(|f| f.attractor).collect::<Vec<_>>()));
    c.that(flags.len() == 3, format!("{} attractors flagged, expected 3", flags.len()));
    let rho = run.outcome.summary.perron_root.ok_or("no spectral radius")?;
    c.within("ρ", rho, 4.0, 1e-6);
    c.within("β", dimension(run)?, 2.0, 1e-6);
    c.runtime(run, 30.0);
    Ok(())
}

/// Shared checks for the two quartic tiles.
fn tile(
    run: &Run,
    c: &mut Check,
    neighbors: usize,
    overlaps: usize,
    raw_count: usize,
    target: usize,
) -> Result<(), String> {
    let s = &run.outcome.summary;
    // The identity is counted in both vertex numbers, so proper maps are one fewer.
    let proper = count(s.neighbor_vertices).wrapping_sub(1);
    let proper_overlaps = count(s.overlap_vertices).wrapping_sub(1);
    c.note(format!("proper neighbors {proper}, overlaps {proper_overlaps}"));
    c.that(proper.abs_diff(neighbors) <= 1, format!("{proper} proper neighbor maps, expected {neighbors}±1"));
    c.that(
        proper_overlaps.abs_diff(overlaps) <= 1,
        format!("{proper_overlaps} overlap vertices, expected {overlaps}±1"),
    );
    let raw = raw(run)?;
    c.note(format!("raw {}", raw.len()));
    c.that(raw.len() == raw_count, format!("raw build has {} sets, expected {raw_count}", raw.len()));
    let sys = reduced(run)?;
    c.note(format!("reduced {}", sys.len()));
    c.that(sys.len() == target, format!("reduction reaches {}, target {target}", sys.len()));
    Ok(())
}

fn tile_modulus(run: &Run) -> Result<f64, String> {
    match &run.cfg.input {
        Input::Ifs(ifs) => Ok(ifs.field().generator().embed().norm_sqr()),
        _ => Err("tile config is not an IFS".into()),
    }
}

fn criterion_6(runs: &mut Runs, c: &mut Check) -> Result<(), String> {
    let run = runs.get("pisot_tile")?;
    tile(run, c, 45, 29, 51, 13)?;
    let irreducible = count(run.outcome.summary.raw_irreducible);
    c.note(format!("irreducible part {irreducible}"));
    c.that(irreducible == 18, format!("irreducible part has {irreducible} sets, expected 18"));
    let p = char_poly(&incidence_matrix(reduced(run)?));
    let dominant = without_rational_roots(&p);
    let p8 = poly(&[1, 1, -3, -15, -20, -15, -3, 1, 1]);
    c.that(dominant == p8, format!("dominant factor {dominant} ≠ x⁸+x⁷−3x⁶−15x⁵−20x⁴−15x³−3x²+x+1"));
    let rho = run.outcome.summary.perron_root.ok_or("no spectral radius")?;
    c.within("ρ", rho, tile_modulus(run)?, 1e-6);
    c.runtime(run, 300.0);
    Ok(())
}

fn criterion_7(runs: &mut Runs, c: &mut Check) -> Result<(), String> {
    let run = runs.get("pisot_tile_asym")?;
    tile(run, c, 97, 67, 87, 13)?;
    c.runtime(run, 600.0);
    Ok(())
}

fn criterion_8(runs: &mut Runs, c: &mut Check) -> Result<(), String> {
    let run = runs.get("ngai_wang")?;
    let beta = dimension(run)?;
    c.within("β", beta, 1.682, 1e-3);
    let s = golden_t().powf(beta);
    c.within("s³−2s−s²+1", s.powi(3) - 2.0 * s - s * s + 1.0, 0.0, 1e-9);
    Ok(())
}

fn criterion_9(runs: &mut Runs, c: &mut Check) -> Result<(), String> {
    for name in ["golden_triangle", "square_2i"] {
        let run = runs.get(name)?;
        let Input::Ifs(ifs) = &run.cfg.input else {
            return Err(format!("{name} is not an IFS"));
        };
        let maps = ifs.numeric_maps();
        let seeds: Vec<_> = ifs.maps().iter().filter_map(|f| f.fixed_point()).collect();
        let whole = point_cloud(&ifs_system(ifs.len()), &maps, 0, 9, &seeds);
        let pieces = point_cloud(reduced(run)?, &maps, 0, 9, &seeds);
        let d = hausdorff_distance(&whole, &pieces);
        let bound = 0.02 * ifs.bounding_radius();
        c.note(format!(
            "{name}: {} vs {} points, d_H={d:.3e} ≤ {bound:.3e}",
            whole.len(),
            pieces.len()
        ));
        c.that(d <= bound, format!("{name}: d_H={d} exceeds {bound}"));
    }
    Ok(())
}

fn file_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        if entry.file_type().unwrap().is_file() {
            out.insert(
                entry.file_name().into_string().unwrap(),
                fs::read(entry.path()).unwrap(),
            );
        }
    }
    out
}

fn criterion_10(runs: &mut Runs, c: &mut Check) -> Result<(), String> {
    type Suite = fn(u32) -> Result<(), String>;
    let suites: [(&str, Suite, u32); 4] = [
        ("field axioms", props::field_axioms_and_inversion, 10_000),
        ("closure", props::closure_matches_power_sum, 200),
        ("char_poly", props::char_poly_matches_cofactor_expansion, 200),
        ("language inclusion", props::language_inclusion_matches_enumeration, 100),
    ];
    for (label, suite, cases) in suites {
        match suite(cases) {
            Ok(()) => c.note(format!("{label} ×{cases}")),
            Err(e) => c.that(false, format!("{label}: {e}")),
        }
    }
    let again = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut validated = 0;
    for name in CONFIGS {
        let run = runs.get(name)?;
        if let (Some(raw), Some(og)) = (&run.outcome.raw, &run.outcome.overlap_graph) {
            let violations = validate_gifs(raw, og);
            c.that(violations.is_empty(), format!("{name}: {} validation violations", violations.len()));
            validated += 1;
        }
        let first = file_bytes(&runs.out.join(name));
        execute(name, &again.path().join(name))?;
        let second = file_bytes(&again.path().join(name));
        c.that(first == second, format!("{name}: outputs differ between runs"));
    }
    c.note(format!("{validated} systems validated, {} configs rerun", CONFIGS.len()));
    Ok(())
}

fn main() {
    let out = tempfile::tempdir().expect("temporary directory");
    let mut runs = Runs::new(out.path());
    type Criterion = fn(&mut Runs, &mut Check) -> Result<(), String>;
    let criteria: [(&str, Criterion); 10] = [
        ("golden triangle", criterion_1),
        ("rational type matrix", criterion_2),
        ("three-map overlap graph", criterion_3),
        ("square IFS over Q(i)", criterion_4),
        ("hexagon", criterion_5),
        ("symmetric quartic tile", criterion_6),
        ("asymmetric quartic tile", criterion_7),
        ("weighted three-attractor system", criterion_8),
        ("Hausdorff witness", criterion_9),
        ("property suites and determinism", criterion_10),
    ];
    let mut failed = 0;
    for (k, (label, criterion)) in criteria.iter().enumerate() {
        let mut check = Check::default();
        if let Err(e) = criterion(&mut runs, &mut check) {
            check.that(false, e);
        }
        let status = if check.failures.is_empty() { "PASS" } else { "FAIL" };
        let mut line = format!("{status} {:>2} {label}: {}", k + 1, check.notes.join(", "));
        if !check.failures.is_empty() {
            failed += 1;
            let _ = write!(line, " | {}", check.failures.join("; "));
        }
        println!("{line}");
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
