//! Stage orchestration and artifact output.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use gifs_core::algebra::AlgebraError;
use gifs_core::dimension::{self, DimensionError};
use gifs_core::gifsbuild::{build_gifs, validate_gifs, GifsError, GifsSystem};
use gifs_core::nbrgraph::{
    build_neighbor_graph, extract_overlap_graph, quotient_vertices, BuildOptions, GraphError, LabeledDigraph,
};
use gifs_core::reduce::{self, irreducible_part, ReduceError, ReduceOptions, ReductionReport};
use gifs_core::render;

use crate::config::{ConfigError, Input, PipelineConfig};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "GIFS_OUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Nbr,
    Overlap,
    Gifs,
    Reduce,
    Dim,
    Render,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Nbr,
        Stage::Overlap,
        Stage::Gifs,
        Stage::Reduce,
        Stage::Dim,
        Stage::Render,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Nbr => "nbr",
            Stage::Overlap => "overlap",
            Stage::Gifs => "gifs",
            Stage::Reduce => "reduce",
            Stage::Dim => "dim",
            Stage::Render => "render",
        }
    }

    /// Stages up to and including `self`.
    pub fn prefix(self) -> Vec<Stage> {
        Stage::ALL.iter().copied().filter(|s| *s <= self).collect()
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .iter()
            .copied()
            .find(|st| st.name() == s.trim())
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

pub fn parse_stages(list: &str) -> Result<Vec<Stage>, String> {
    let mut out: Vec<Stage> = list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_, _>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("stage {stage}: {message}")]
    Budget { stage: Stage, message: String },
    #[error("stage {stage}: {message}")]
    Numeric { stage: Stage, message: String },
    #[error("stage {stage}: {message}")]
    Failed { stage: Stage, message: String },
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Budget { .. } => 3,
            PipelineError::Numeric { .. } => 4,
            PipelineError::Failed { .. } | PipelineError::Io { .. } => 1,
        }
    }

    fn graph(stage: Stage, e: GraphError) -> Self {
        let message = e.to_string();
        match e {
            GraphError::FiniteTypeBudgetExceeded { .. } => PipelineError::Budget { stage, message },
            GraphError::Algebra(AlgebraError::RootRefinementFailed(_)) => PipelineError::Numeric { stage, message },
            GraphError::InvalidQuotient(_) => PipelineError::Config(ConfigError { violations: vec![message] }),
            _ => PipelineError::Failed { stage, message },
        }
    }

    fn gifs(stage: Stage, e: GifsError) -> Self {
        let message = e.to_string();
        match e {
            GifsError::BudgetExceeded { .. } => PipelineError::Budget { stage, message },
            GifsError::Invalid(_) => PipelineError::Failed { stage, message },
        }
    }

    fn reduce(stage: Stage, e: ReduceError) -> Self {
        match e {
            ReduceError::Gifs(g) => Self::gifs(stage, g),
            ReduceError::Dimension(d) => Self::dimension(stage, d),
            ReduceError::StateBudgetExceeded { .. } => PipelineError::Budget {
                stage,
                message: e.to_string(),
            },
            ReduceError::Invalid(_) => PipelineError::Failed {
                stage,
                message: e.to_string(),
            },
        }
    }

    fn dimension(stage: Stage, e: DimensionError) -> Self {
        let message = e.to_string();
        match e {
            DimensionError::NonConvergence(_) => PipelineError::Numeric { stage, message },
            DimensionError::Invalid(_) => PipelineError::Failed { stage, message },
        }
    }
}

/// Counts and results of one run. Deterministic: no timings or paths outside the output
/// directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub name: String,
    pub input: String,
    pub stages: Vec<Stage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ordering: Option<Vec<usize>>,
    /// Neighbor-graph vertices including the identity.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neighbor_vertices: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neighbor_edges: Option<usize>,
    /// Overlap-graph vertices including the identity, before symmetry identification.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap_vertices: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap_vertices_identified: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_attractors: Option<usize>,
    /// Size of the strongly connected component of B_1 in the raw system.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_irreducible: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation_violations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reduced_attractors: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub reduction_stages: Vec<(String, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degenerate: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perron_root: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub char_poly: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perron_factor: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rendered_pieces: Option<usize>,
    /// Artifact stem → content-addressed file name.
    pub artifacts: BTreeMap<String, String>,
}

/// In-memory results, for callers that want more than the files.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub summary: Summary,
    pub neighbor_graph: Option<LabeledDigraph>,
    pub overlap_graph: Option<LabeledDigraph>,
    pub raw: Option<GifsSystem>,
    pub reduced: Option<GifsSystem>,
    pub reduction: Option<ReductionReport>,
    pub dimension: Option<dimension::DimensionReport>,
}

/// Stages that can run for the given input, in order.
pub fn available_stages(input: &Input) -> Vec<Stage> {
    match input {
        Input::Ifs(_) => Stage::ALL.to_vec(),
        Input::OverlapGraph(_) => vec![Stage::Overlap, Stage::Gifs, Stage::Reduce, Stage::Dim],
        Input::Weighted(_) => vec![Stage::Dim],
    }
}

/// Checks that `stages` is a prefix of what the input supports.
pub fn check_stages(input: &Input, stages: &[Stage]) -> Result<(), ConfigError> {
    let avail = available_stages(input);
    let mut errs = Vec::new();
    for s in stages {
        if !avail.contains(s) {
            errs.push(format!("stages: {s} is not available for {} input", input.kind()));
        }
    }
    if errs.is_empty() {
        let n = stages.len();
        if stages != &avail[..n.min(avail.len())] {
            errs.push(format!(
                "stages: {:?} must be a prefix of {:?}",
                stages.iter().map(|s| s.name()).collect::<Vec<_>>(),
                avail.iter().map(|s| s.name()).collect::<Vec<_>>()
            ));
        }
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(ConfigError { violations: errs })
    }
}

/// Writes `<stem>.<hash>.<ext>` and the stable alias `latest/<stem>.<ext>`.
struct Writer {
    dir: PathBuf,
    artifacts: BTreeMap<String, String>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self, PipelineError> {
        for d in [dir.to_path_buf(), dir.join("latest")] {
            std::fs::create_dir_all(&d).map_err(|source| PipelineError::Io { path: d.clone(), source })?;
        }
        Ok(Writer {
            dir: dir.to_path_buf(),
            artifacts: BTreeMap::new(),
        })
    }

    fn write(&mut self, stem: &str, ext: &str, content: &str) -> Result<(), PipelineError> {
        let digest = Sha256::digest(content.as_bytes());
        let hash: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        let name = format!("{stem}.{hash}.{ext}");
        for path in [self.dir.join(&name), self.dir.join("latest").join(format!("{stem}.{ext}"))] {
            std::fs::write(&path, content).map_err(|source| PipelineError::Io { path, source })?;
        }
        self.artifacts.insert(format!("{stem}.{ext}"), name);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, stem: &str, value: &T) -> Result<(), PipelineError> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.write(stem, "json", &text)
    }
}

pub fn run_pipeline(cfg: &PipelineConfig, stages: &[Stage], out_dir: &Path) -> Result<Outcome, PipelineError> {
    let mut stages = stages.to_vec();
    stages.sort();
    stages.dedup();
    check_stages(&cfg.input, &stages)?;
    let mut w = Writer::new(out_dir)?;
    let mut out = Outcome::default();
    let mut summary = Summary::default();
    let s = &mut summary;
    s.name = cfg.name.clone();
    s.input = cfg.input.kind().to_string();
    s.stages = stages.clone();
    s.ordering = cfg.ordering.clone();
    let opts = &cfg.options;
    let descriptor = cfg.field.as_ref().map(|f| f.descriptor().clone());

    let mut og: Option<LabeledDigraph> = None;
    match &cfg.input {
        Input::Ifs(ifs) => {
            s.map_count = Some(ifs.len());
            if stages.contains(&Stage::Nbr) {
                let build = BuildOptions {
                    max_vertices: opts.max_vertices,
                    prune_slack: opts.prune_slack,
                };
                let nbr = build_neighbor_graph(ifs, &build).map_err(|e| PipelineError::graph(Stage::Nbr, e))?;
                s.neighbor_vertices = Some(nbr.vertex_count());
                s.neighbor_edges = Some(nbr.edges().len());
                w.json("neighbor_graph", &nbr.to_doc(descriptor.as_ref()))?;
                w.write("neighbor_graph", "dot", &nbr.to_dot("neighbor graph"))?;
                if stages.contains(&Stage::Overlap) {
                    og = Some(extract_overlap_graph(&nbr));
                }
                out.neighbor_graph = Some(nbr);
            }
        }
        Input::OverlapGraph(g) => {
            s.map_count = Some(g.map_count());
            og = Some(g.clone());
        }
        Input::Weighted(_) => {}
    }

    if let Some(g) = og.take() {
        s.overlap_vertices = Some(g.vertex_count());
        let pairs = cfg.identification_pairs(&g)?;
        let g = if pairs.is_empty() {
            g
        } else {
            let q = quotient_vertices(&g, &pairs).map_err(|e| PipelineError::graph(Stage::Overlap, e))?;
            s.overlap_vertices_identified = Some(q.vertex_count());
            q
        };
        w.json("overlap_graph", &g.to_doc(descriptor.as_ref()))?;
        w.write("overlap_graph", "dot", &g.to_dot("overlap graph"))?;
        og = Some(g);
        out.overlap_graph = og.clone();
    }

    let mut system: Option<GifsSystem> = None;
    if stages.contains(&Stage::Gifs) {
        let g = og.as_ref().expect("overlap stage ran");
        let raw = build_gifs(g, opts.gifs_budget).map_err(|e| PipelineError::gifs(Stage::Gifs, e))?;
        let violations = validate_gifs(&raw, g);
        s.raw_attractors = Some(raw.len());
        s.raw_irreducible = Some(irreducible_part(&raw).len());
        s.validation_violations = Some(violations.len());
        w.json("gifs_raw", &raw.to_doc(Some(g)))?;
        w.json("gifs_validation", &violations)?;
        system = Some(raw.clone());
        out.raw = Some(raw);
    }

    if stages.contains(&Stage::Reduce) {
        let raw = system.as_ref().expect("gifs stage ran");
        let ropts = ReduceOptions {
            max_rounds: opts.max_rounds,
            state_cap: opts.state_cap,
            budget: opts.gifs_budget,
            drop_degenerate: opts.drop_degenerate,
        };
        let graph = if opts.prune { og.as_ref() } else { None };
        let (red, report) =
            reduce::reduce(raw, graph, &ropts).map_err(|e| PipelineError::reduce(Stage::Reduce, e))?;
        s.reduced_attractors = Some(red.len());
        s.reduction_stages = report.stages.iter().map(|c| (c.stage.clone(), c.count)).collect();
        s.degenerate = Some(report.degenerate.iter().map(|f| f.attractor).collect());
        w.json("gifs_reduced", &red.to_doc(og.as_ref()))?;
        w.json("reduction_report", &report)?;
        system = Some(red.clone());
        out.reduced = Some(red);
        out.reduction = Some(report);
    }

    if stages.contains(&Stage::Dim) {
        match &cfg.input {
            Input::Weighted(wg) => {
                let beta = dimension::hausdorff_dim_weighted(wg).map_err(|e| PipelineError::dimension(Stage::Dim, e))?;
                s.dimension = Some(beta);
                w.json("dimension", &WeightedReport { dimension: beta, equations: wg.equations.clone() })?;
            }
            _ => {
                let sys = system.as_ref().expect("gifs stage ran");
                let ratio = match &cfg.input {
                    Input::Ifs(ifs) => Some(ifs.ratio()),
                    _ => opts.ratio,
                };
                let rep = dimension::dimension_report(sys, ratio)
                    .map_err(|e| PipelineError::dimension(Stage::Dim, e))?;
                s.perron_root = Some(rep.perron_root);
                s.dimension = rep.dimension;
                s.char_poly = Some(rep.char_poly_text.clone());
                s.perron_factor = rep.perron_factor_text.clone();
                w.json("dimension", &rep)?;
                out.dimension = Some(rep);
            }
        }
    }

    if stages.contains(&Stage::Render) {
        let Input::Ifs(ifs) = &cfg.input else { unreachable!("checked") };
        let sys = system.as_ref().expect("gifs stage ran");
        let maps = ifs.numeric_maps();
        let seed = render::default_seed(&maps);
        let pieces = render::expand_pieces(sys, &maps, 0, opts.depth);
        let hulls = render::type_hulls(sys, &maps, seed);
        let svg = render::svg_from_pieces(&pieces, &hulls, &render::SvgOptions::default());
        let cloud = render::point_cloud(sys, &maps, 0, opts.depth, &[seed]);
        s.rendered_pieces = Some(pieces.len());
        w.write("pieces", "svg", &svg)?;
        w.write("cloud", "csv", &cloud.to_csv())?;
        w.write("cloud", "json", &cloud.to_json())?;
    }

    s.artifacts = w.artifacts.clone();
    w.json("summary", &summary)?;
    out.summary = summary;
    Ok(out)
}

#[derive(Serialize)]
struct WeightedReport {
    dimension: f64,
    equations: Vec<Vec<(f64, usize)>>,
}

/// Output directory: explicit flag, then config, then the environment, then `./gifs-out`.
pub fn resolve_out_dir(flag: Option<&Path>, cfg: &PipelineConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.options.out_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("gifs-out"))
}
