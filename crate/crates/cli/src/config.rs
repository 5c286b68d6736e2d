//! Pipeline configuration: one JSON document, or TOML with the same shape.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use gifs_core::algebra::{element_from_repr, FieldDescriptor, NumberField, RationalRepr};
use gifs_core::dimension::WeightedGifs;
use gifs_core::nbrgraph::{GraphDoc, LabeledDigraph};
use gifs_core::similitude::{IfsSpec, MapSpec, Similitude};

/// Every problem found in a config, each prefixed by its field path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub violations: Vec<String>,
}

impl ConfigError {
    fn single(msg: impl Into<String>) -> Self {
        ConfigError {
            violations: vec![msg.into()],
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config: {}", self.violations.join("; "))
    }
}

impl std::error::Error for ConfigError {}

/// A term ratio: a plain number, or a coefficient vector in the config's field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RatioSpec {
    Number(f64),
    Element(Vec<RationalRepr>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedTerm {
    #[serde(default)]
    pub map: Option<usize>,
    pub ratio: RatioSpec,
    /// 1-based attractor index.
    pub target: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedDoc {
    pub equations: Vec<Vec<WeightedTerm>>,
}

/// A vertex pair to identify: overlap-graph indices, or the two neighbor maps themselves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Identification {
    Indices([usize; 2]),
    Maps([MapSpec; 2]),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    pub max_vertices: usize,
    pub prune_slack: Option<f64>,
    pub gifs_budget: usize,
    pub state_cap: usize,
    pub max_rounds: usize,
    /// Run language-based pruning during reduction.
    pub prune: bool,
    pub drop_degenerate: bool,
    /// Contraction ratio for the dimension stage when no IFS is given.
    pub ratio: Option<f64>,
    pub depth: usize,
    pub out_dir: Option<PathBuf>,
    pub reverse_order: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            max_vertices: 10_000,
            prune_slack: None,
            gifs_budget: gifs_core::gifsbuild::DEFAULT_BUDGET,
            state_cap: gifs_core::reduce::DEFAULT_STATE_CAP,
            max_rounds: 32,
            prune: true,
            drop_degenerate: false,
            ratio: None,
            depth: 6,
            out_dir: None,
            reverse_order: false,
        }
    }
}

/// What the pipeline starts from.
#[derive(Clone, Debug)]
pub enum Input {
    Ifs(IfsSpec),
    OverlapGraph(LabeledDigraph),
    Weighted(WeightedGifs),
}

impl Input {
    pub fn kind(&self) -> &'static str {
        match self {
            Input::Ifs(_) => "ifs",
            Input::OverlapGraph(_) => "overlap_graph",
            Input::Weighted(_) => "weighted_gifs",
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub name: String,
    pub field: Option<Arc<NumberField>>,
    pub input: Input,
    /// Effective ordering already applied to the input, if any.
    pub ordering: Option<Vec<usize>>,
    pub identifications: Vec<Identification>,
    pub options: Options,
}

/// `notes` is free text for humans (a string or a list of lines) and is otherwise ignored.
const KNOWN: [&str; 9] = [
    "name",
    "notes",
    "field",
    "maps",
    "overlap_graph",
    "weighted_gifs",
    "ordering",
    "symmetry_identifications",
    "options",
];

#[derive(Deserialize)]
#[serde(untagged)]
enum Notes {
    #[allow(dead_code)]
    Line(String),
    #[allow(dead_code)]
    Lines(Vec<String>),
}

/// Reads and validates a config; `.toml` files are parsed as TOML, everything else as JSON.
pub fn parse_config(path: &Path) -> Result<PipelineConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::single(format!("{}: {e}", path.display())))?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "config".into());
    parse_config_str(&text, is_toml, &stem)
}

pub fn parse_config_str(text: &str, is_toml: bool, default_name: &str) -> Result<PipelineConfig, ConfigError> {
    let value: Value = if is_toml {
        let t: toml::Value = toml::from_str(text).map_err(|e| ConfigError::single(format!("toml: {e}")))?;
        serde_json::to_value(t).map_err(|e| ConfigError::single(format!("toml: {e}")))?
    } else {
        serde_json::from_str(text).map_err(|e| ConfigError::single(format!("json: {e}")))?
    };
    from_value(value, default_name)
}

fn take<T: DeserializeOwned>(obj: &Map<String, Value>, key: &str, errs: &mut Vec<String>) -> Option<T> {
    let v = obj.get(key)?;
    match serde_json::from_value(v.clone()) {
        Ok(x) => Some(x),
        Err(e) => {
            errs.push(format!("{key}: {e}"));
            None
        }
    }
}

pub fn from_value(value: Value, default_name: &str) -> Result<PipelineConfig, ConfigError> {
    let Value::Object(obj) = value else {
        return Err(ConfigError::single("config must be an object"));
    };
    let mut errs = Vec::new();
    for key in obj.keys() {
        if !KNOWN.contains(&key.as_str()) {
            errs.push(format!("{key}: unknown field"));
        }
    }
    let name: Option<String> = take(&obj, "name", &mut errs);
    let _: Option<Notes> = take(&obj, "notes", &mut errs);
    let field_desc: Option<FieldDescriptor> = take(&obj, "field", &mut errs);
    let maps: Option<Vec<MapSpec>> = take(&obj, "maps", &mut errs);
    let graph: Option<GraphDoc> = take(&obj, "overlap_graph", &mut errs);
    let weighted: Option<WeightedDoc> = take(&obj, "weighted_gifs", &mut errs);
    let ordering: Option<Vec<usize>> = take(&obj, "ordering", &mut errs);
    let identifications: Vec<Identification> =
        take(&obj, "symmetry_identifications", &mut errs).unwrap_or_default();
    let options: Options = take(&obj, "options", &mut errs).unwrap_or_default();

    let given = [
        obj.contains_key("maps"),
        obj.contains_key("overlap_graph"),
        obj.contains_key("weighted_gifs"),
    ];
    match given.iter().filter(|&&b| b).count() {
        0 => errs.push("exactly one of maps, overlap_graph, weighted_gifs is required; none given".into()),
        1 => {}
        _ => errs.push("exactly one of maps, overlap_graph, weighted_gifs is required; several given".into()),
    }

    let field = match &field_desc {
        Some(desc) => match NumberField::new(desc.clone()) {
            Ok(f) => Some(f),
            Err(e) => {
                errs.push(format!("field: {e}"));
                None
            }
        },
        None => {
            if obj.contains_key("maps") {
                errs.push("field: required when maps are given".into());
            }
            None
        }
    };
    if options.max_vertices == 0 {
        errs.push("options.max_vertices: must be at least 1".into());
    }
    if options.gifs_budget == 0 {
        errs.push("options.gifs_budget: must be at least 1".into());
    }
    if options.prune_slack.is_some_and(|s| !(s >= 0.0)) {
        errs.push("options.prune_slack: must be nonnegative".into());
    }
    if options.ratio.is_some_and(|r| !(r > 0.0 && r < 1.0)) {
        errs.push("options.ratio: must lie in (0, 1)".into());
    }

    let mut input = None;
    if let (Some(maps), Some(field)) = (&maps, &field) {
        let mut sims = Vec::new();
        for (k, spec) in maps.iter().enumerate() {
            match Similitude::from_spec(field, spec) {
                Ok(s) if !(s.ratio() < 1.0) => errs.push(format!("maps[{k}]: not contractive (ratio {})", s.ratio())),
                Ok(s) => sims.push(s),
                Err(e) => errs.push(format!("maps[{k}]: {e}")),
            }
        }
        if sims.len() == maps.len() {
            match IfsSpec::new(field.clone(), sims) {
                Ok(ifs) => input = Some(Input::Ifs(ifs)),
                Err(e) => errs.push(format!("maps: {e}")),
            }
        }
    }
    if let Some(doc) = &graph {
        match LabeledDigraph::from_doc(doc, field.as_ref()) {
            Ok(g) => input = Some(Input::OverlapGraph(g)),
            Err(e) => errs.push(format!("overlap_graph: {e}")),
        }
    }
    if let Some(doc) = &weighted {
        let mut eqs = Vec::new();
        for (k, eq) in doc.equations.iter().enumerate() {
            let mut terms = Vec::new();
            for (t, term) in eq.iter().enumerate() {
                let path = format!("weighted_gifs.equations[{k}][{t}]");
                let ratio = match &term.ratio {
                    RatioSpec::Number(r) => Some(*r),
                    RatioSpec::Element(c) => match &field {
                        Some(f) => match element_from_repr(f, c) {
                            Ok(e) => Some(e.embed().norm()),
                            Err(e) => {
                                errs.push(format!("{path}.ratio: {e}"));
                                None
                            }
                        },
                        None => {
                            errs.push(format!("{path}.ratio: a coefficient vector needs a field"));
                            None
                        }
                    },
                };
                if term.target == 0 || term.target > doc.equations.len() {
                    errs.push(format!("{path}.target: {} is not an attractor index", term.target));
                } else if let Some(r) = ratio {
                    terms.push((r, term.target - 1));
                }
            }
            eqs.push(terms);
        }
        match WeightedGifs::new(eqs) {
            Ok(w) => input = Some(Input::Weighted(w)),
            Err(e) => errs.push(format!("weighted_gifs: {e}")),
        }
    }

    let m = match &input {
        Some(Input::Ifs(ifs)) => Some(ifs.len()),
        Some(Input::OverlapGraph(g)) => Some(g.map_count()),
        _ => None,
    };
    if let (Some(ord), Some(m)) = (&ordering, m) {
        let mut sorted = ord.clone();
        sorted.sort_unstable();
        if sorted != (1..=m).collect::<Vec<_>>() {
            errs.push(format!("ordering: {ord:?} is not a permutation of 1..={m}"));
        }
    } else if ordering.is_some() && matches!(input, Some(Input::Weighted(_))) {
        errs.push("ordering: not applicable to weighted_gifs".into());
    }
    if !identifications.is_empty() && matches!(input, Some(Input::Weighted(_))) {
        errs.push("symmetry_identifications: not applicable to weighted_gifs".into());
    }
    for (k, id) in identifications.iter().enumerate() {
        if let Identification::Maps(pair) = id {
            match &field {
                Some(f) => {
                    for (side, spec) in pair.iter().enumerate() {
                        if let Err(e) = Similitude::from_spec(f, spec) {
                            errs.push(format!("symmetry_identifications[{k}][{side}]: {e}"));
                        }
                    }
                }
                None => errs.push(format!("symmetry_identifications[{k}]: map pairs need a field")),
            }
        }
    }

    if !errs.is_empty() {
        return Err(ConfigError { violations: errs });
    }
    let mut cfg = PipelineConfig {
        name: name.unwrap_or_else(|| default_name.to_string()),
        field,
        input: input.expect("validated"),
        ordering: None,
        identifications,
        options,
    };
    cfg.apply_ordering(ordering.as_deref(), cfg.options.reverse_order)?;
    Ok(cfg)
}

impl PipelineConfig {
    /// Relabels maps: position `k` receives old map `ordering[k]`; `reverse` then reverses the
    /// result.
    pub fn apply_ordering(&mut self, ordering: Option<&[usize]>, reverse: bool) -> Result<(), ConfigError> {
        let m = match &self.input {
            Input::Ifs(ifs) => ifs.len(),
            Input::OverlapGraph(g) => g.map_count(),
            Input::Weighted(_) => {
                if reverse || ordering.is_some() {
                    return Err(ConfigError::single("ordering: not applicable to weighted_gifs"));
                }
                return Ok(());
            }
        };
        let mut ord: Vec<usize> = ordering.map(<[usize]>::to_vec).unwrap_or_else(|| (1..=m).collect());
        if reverse {
            ord.reverse();
        }
        if ord.iter().copied().eq(1..=m) {
            return Ok(());
        }
        match &mut self.input {
            Input::Ifs(ifs) => *ifs = ifs.permuted(&ord),
            Input::OverlapGraph(g) => {
                *g = g
                    .permute_labels(&ord)
                    .map_err(|e| ConfigError::single(format!("ordering: {e}")))?
            }
            Input::Weighted(_) => unreachable!(),
        }
        // Compose with any ordering applied earlier.
        self.ordering = Some(match &self.ordering {
            Some(prev) => ord.iter().map(|&o| prev[o - 1]).collect(),
            None => ord,
        });
        Ok(())
    }

    /// Resolves identifications to overlap-graph index pairs.
    pub fn identification_pairs(&self, og: &LabeledDigraph) -> Result<Vec<(usize, usize)>, ConfigError> {
        let mut out = Vec::new();
        let mut errs = Vec::new();
        for (k, id) in self.identifications.iter().enumerate() {
            match id {
                Identification::Indices([a, b]) => out.push((*a, *b)),
                Identification::Maps(pair) => {
                    let field = self.field.as_ref().expect("validated");
                    let mut idx = [0usize; 2];
                    for (side, spec) in pair.iter().enumerate() {
                        let h = Similitude::from_spec(field, spec).expect("validated");
                        match og.find_map(&h) {
                            Some(v) => idx[side] = v,
                            None => errs.push(format!(
                                "symmetry_identifications[{k}][{side}]: {h} is not an overlap vertex"
                            )),
                        }
                    }
                    out.push((idx[0], idx[1]));
                }
            }
        }
        if errs.is_empty() {
            Ok(out)
        } else {
            Err(ConfigError { violations: errs })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "field": {"min_poly": [0, 1], "root_hint": [0, 0]},
        "maps": [{"a": ["1/2"], "b": [0]}, {"a": ["1/2"], "b": [1]}]
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config_str(MINIMAL, false, "min").unwrap();
        assert_eq!(cfg.name, "min");
        assert_eq!(cfg.options, Options::default());
        assert!(matches!(cfg.input, Input::Ifs(ref ifs) if ifs.len() == 2));
    }

    #[test]
    fn toml_is_accepted() {
        let text = r#"
            name = "interval"
            [field]
            min_poly = [0, 1]
            root_hint = [0.0, 0.0]
            [[maps]]
            a = ["1/2"]
            b = [0]
            [[maps]]
            a = ["1/2"]
            b = [1]
        "#;
        let cfg = parse_config_str(text, true, "x").unwrap();
        assert_eq!(cfg.name, "interval");
    }

    #[test]
    fn ordering_permutes_maps() {
        let text = r#"{
            "field": {"min_poly": [0, 1], "root_hint": [0, 0]},
            "maps": [{"a": ["1/2"], "b": [0]}, {"a": ["1/2"], "b": [1]}, {"a": ["1/2"], "b": [2]}],
            "ordering": [2, 1, 3]
        }"#;
        let cfg = parse_config_str(text, false, "x").unwrap();
        let Input::Ifs(ifs) = &cfg.input else { panic!() };
        assert_eq!(ifs.map(1).b().to_string(), "1");
        assert_eq!(ifs.map(2).b().to_string(), "0");
        assert_eq!(cfg.ordering, Some(vec![2, 1, 3]));
    }

    #[test]
    fn every_violation_is_listed() {
        let text = r#"{
            "field": {"min_poly": [0, 1], "root_hint": [0, 0]},
            "maps": [{"a": ["1/2"], "b": [0]}],
            "overlap_graph": {"m": 1, "vertices": [{"name": "id"}], "edges": []},
            "colour": "red",
            "options": {"max_vertices": 0}
        }"#;
        let err = parse_config_str(text, false, "x").unwrap_err();
        assert!(err.violations.len() >= 3, "{err}");
        assert!(err.to_string().contains("colour: unknown field"));
        assert!(!err.to_string().contains('\n'));
    }

    #[test]
    fn bad_ordering_rejected() {
        let text = MINIMAL.replace("\"maps\"", "\"ordering\": [1, 1], \"maps\"");
        let err = parse_config_str(&text, false, "x").unwrap_err();
        assert!(err.violations[0].starts_with("ordering"));
    }
}
