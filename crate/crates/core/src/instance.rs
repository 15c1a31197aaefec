//! Benchmark instance handling: parsers for the public Caserta and Zhu
//! layouts, the crate's native weighted format, seeded weight attachment,
//! and generation of training sets. Every format is documented byte-exactly
//! in `docs/formats.md`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::rng::{fnv1a64, SplitMix64};
use crate::yard::{Bay, Container, Slot, YardError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceOrigin {
    Caserta,
    Zhu,
    Generated,
}

impl InstanceOrigin {
    pub fn label(self) -> &'static str {
        match self {
            InstanceOrigin::Caserta => "caserta",
            InstanceOrigin::Zhu => "zhu",
            InstanceOrigin::Generated => "generated",
        }
    }

    fn from_label(label: &str) -> Option<Self> {
        match label {
            "caserta" => Some(InstanceOrigin::Caserta),
            "zhu" => Some(InstanceOrigin::Zhu),
            "generated" => Some(InstanceOrigin::Generated),
            _ => None,
        }
    }
}

/// One benchmark problem: an initial layout, the height limit, and
/// (optionally) per-container weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: String,
    /// Initial layout, one inner vec per stack, ids bottom to top.
    pub stacks: Vec<Vec<u32>>,
    pub max_height: usize,
    /// Container weights in tons, keyed by id; present on adapted and
    /// generated instances.
    pub weights: Option<BTreeMap<u32, f64>>,
    pub origin: InstanceOrigin,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("stack {stack} declares {count} containers, exceeding max height {max}")]
    StackOverfilled {
        stack: usize,
        count: usize,
        max: usize,
    },
    #[error("duplicate container id {0}")]
    DuplicateContainerId(u32),
    #[error("container ids must be exactly 1..=C")]
    IdsNotContiguous,
    #[error("the header does not carry a max stack height")]
    MissingMaxHeight,
    #[error("instance already has weights attached")]
    WeightsAlreadyPresent,
    #[error("instance has no container weights")]
    MissingWeights,
    #[error("weight listed for container {0} which is not in the layout")]
    WeightForUnknownContainer(u32),
}

impl Instance {
    pub fn container_count(&self) -> usize {
        self.stacks.iter().map(Vec::len).sum()
    }

    pub fn stack_count(&self) -> usize {
        self.stacks.len()
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Materialise the weighted bay this instance describes.
    pub fn to_bay(&self, initial_crane: Slot) -> Result<Bay, ParseError> {
        let weights = self.weights.as_ref().ok_or(ParseError::MissingWeights)?;
        let stacks = self
            .stacks
            .iter()
            .map(|stack| {
                stack
                    .iter()
                    .map(|&id| {
                        weights
                            .get(&id)
                            .map(|&w| Container::new(id, w))
                            .ok_or(ParseError::MissingWeights)
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Bay::new(stacks, self.max_height, initial_crane).map_err(|e| match e {
            YardError::DuplicateContainerId(id) => ParseError::DuplicateContainerId(id),
            YardError::StackTooTall { stack, len, max } => ParseError::StackOverfilled {
                stack,
                count: len,
                max,
            },
            other => ParseError::MalformedHeader(other.to_string()),
        })
    }

    /// Ids in the layout, ascending.
    fn sorted_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.stacks.iter().flatten().copied().collect();
        ids.sort_unstable();
        ids
    }

    fn validate_ids(&self) -> Result<(), ParseError> {
        let ids = self.sorted_ids();
        for pair in ids.windows(2) {
            if pair[0] == pair[1] {
                return Err(ParseError::DuplicateContainerId(pair[0]));
            }
        }
        let contiguous = ids
            .iter()
            .enumerate()
            .all(|(i, &id)| id == (i + 1) as u32);
        if !contiguous {
            return Err(ParseError::IdsNotContiguous);
        }
        Ok(())
    }
}

fn int_fields(line: &str) -> Result<Vec<u64>, String> {
    line.split_whitespace()
        .map(|tok| tok.parse::<u64>().map_err(|e| format!("`{tok}`: {e}")))
        .collect()
}

fn meaningful_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Parse the stack lines shared by the Caserta and Zhu layouts: each line
/// is a count followed by that many ids, bottom to top.
fn parse_stack_lines<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    stack_count: usize,
) -> Result<Vec<Vec<u32>>, ParseError> {
    let mut stacks = Vec::with_capacity(stack_count);
    for s in 0..stack_count {
        let (line_no, line) = lines.next().ok_or_else(|| ParseError::MalformedHeader(
            format!("expected {stack_count} stack lines, found {s}"),
        ))?;
        let fields = int_fields(line).map_err(|message| ParseError::MalformedLine {
            line: line_no,
            message,
        })?;
        let (count, ids) = fields.split_first().ok_or(ParseError::MalformedLine {
            line: line_no,
            message: "empty stack line".into(),
        })?;
        if ids.len() != *count as usize {
            return Err(ParseError::MalformedLine {
                line: line_no,
                message: format!("declared {count} containers, found {}", ids.len()),
            });
        }
        stacks.push(ids.iter().map(|&id| id as u32).collect());
    }
    Ok(stacks)
}

/// Optional trailing `weights` section used by adapted datasets: a line
/// reading `weights <C>` followed by `<id> <weight>` pairs. Leaves the
/// iterator untouched when the next line is not a weights header.
fn parse_weight_section<'a, I: Iterator<Item = (usize, &'a str)>>(
    lines: &mut std::iter::Peekable<I>,
    layout_ids: &[u32],
) -> Result<Option<BTreeMap<u32, f64>>, ParseError> {
    match lines.peek() {
        Some((_, line)) if line.split_whitespace().next() == Some("weights") => {}
        _ => return Ok(None),
    }
    let (line_no, line) = lines.next().expect("peeked");
    let mut fields = line.split_whitespace();
    fields.next(); // the `weights` keyword
    let count: usize = fields
        .next()
        .and_then(|tok| tok.parse().ok())
        .ok_or(ParseError::MalformedLine {
            line: line_no,
            message: "expected `weights <count>`".into(),
        })?;
    let mut weights = BTreeMap::new();
    for _ in 0..count {
        let (line_no, line) = lines.next().ok_or(ParseError::MalformedHeader(
            "weight section ended early".into(),
        ))?;
        let mut fields = line.split_whitespace();
        let id: u32 = fields
            .next()
            .and_then(|tok| tok.parse().ok())
            .ok_or(ParseError::MalformedLine {
                line: line_no,
                message: "expected `<id> <weight>`".into(),
            })?;
        let weight: f64 = fields
            .next()
            .and_then(|tok| tok.parse().ok())
            .ok_or(ParseError::MalformedLine {
                line: line_no,
                message: "expected `<id> <weight>`".into(),
            })?;
        if !layout_ids.contains(&id) {
            return Err(ParseError::WeightForUnknownContainer(id));
        }
        if weights.insert(id, weight).is_some() {
            return Err(ParseError::DuplicateContainerId(id));
        }
    }
    if weights.len() != layout_ids.len() {
        return Err(ParseError::MissingWeights);
    }
    Ok(Some(weights))
}

/// Parse the Caserta layout: header `S N` (stack count and either the total
/// container count or the uniform per-stack fill), then S stack lines. The
/// height limit is the initial fill plus two tiers.
pub fn parse_caserta(text: &str) -> Result<Instance, ParseError> {
    let mut lines = meaningful_lines(text).peekable();
    let (_, header) = lines
        .next()
        .ok_or_else(|| ParseError::MalformedHeader("empty file".into()))?;
    let fields =
        int_fields(header).map_err(ParseError::MalformedHeader)?;
    let [stack_count, declared] = fields[..] else {
        return Err(ParseError::MalformedHeader(format!(
            "expected `stacks containers`, found `{header}`"
        )));
    };
    let stack_count = stack_count as usize;
    if stack_count == 0 {
        return Err(ParseError::MalformedHeader("zero stacks".into()));
    }
    let stacks = parse_stack_lines(&mut lines, stack_count)?;
    let total: usize = stacks.iter().map(Vec::len).sum();
    let uniform_fill = stacks.iter().map(Vec::len).max().unwrap_or(0);
    let header_matches_total = declared as usize == total;
    let header_matches_fill = stacks.iter().all(|s| s.len() == declared as usize);
    if !header_matches_total && !header_matches_fill {
        return Err(ParseError::MalformedHeader(format!(
            "header declares {declared}, neither the total ({total}) nor the per-stack fill"
        )));
    }
    let instance = Instance {
        id: String::new(),
        stacks,
        max_height: uniform_fill + 2,
        weights: None,
        origin: InstanceOrigin::Caserta,
    };
    instance.validate_ids()?;
    let ids = instance.sorted_ids();
    let weights = parse_weight_section(&mut lines, &ids)?;
    if let Some((line_no, line)) = lines.next() {
        return Err(ParseError::MalformedLine {
            line: line_no,
            message: format!("unexpected trailing content `{line}`"),
        });
    }
    Ok(Instance { weights, ..instance })
}

/// Parse the Zhu layout: header `S H N` with an explicit per-instance max
/// height, then S stack lines.
pub fn parse_zhu(text: &str) -> Result<Instance, ParseError> {
    let mut lines = meaningful_lines(text).peekable();
    let (_, header) = lines
        .next()
        .ok_or_else(|| ParseError::MalformedHeader("empty file".into()))?;
    let fields = int_fields(header).map_err(ParseError::MalformedHeader)?;
    if fields.len() == 2 {
        return Err(ParseError::MissingMaxHeight);
    }
    let [stack_count, max_height, declared] = fields[..] else {
        return Err(ParseError::MalformedHeader(format!(
            "expected `stacks max_height containers`, found `{header}`"
        )));
    };
    let stack_count = stack_count as usize;
    let max_height = max_height as usize;
    if stack_count == 0 || max_height == 0 {
        return Err(ParseError::MalformedHeader(
            "zero stacks or zero height".into(),
        ));
    }
    let stacks = parse_stack_lines(&mut lines, stack_count)?;
    for (i, stack) in stacks.iter().enumerate() {
        if stack.len() > max_height {
            return Err(ParseError::StackOverfilled {
                stack: i + 1,
                count: stack.len(),
                max: max_height,
            });
        }
    }
    let total: usize = stacks.iter().map(Vec::len).sum();
    if declared as usize != total {
        return Err(ParseError::MalformedHeader(format!(
            "header declares {declared} containers, layout holds {total}"
        )));
    }
    let instance = Instance {
        id: String::new(),
        stacks,
        max_height,
        weights: None,
        origin: InstanceOrigin::Zhu,
    };
    instance.validate_ids()?;
    let ids = instance.sorted_ids();
    let weights = parse_weight_section(&mut lines, &ids)?;
    if let Some((line_no, line)) = lines.next() {
        return Err(ParseError::MalformedLine {
            line: line_no,
            message: format!("unexpected trailing content `{line}`"),
        });
    }
    Ok(Instance { weights, ..instance })
}

/// Parse the native format (see `docs/formats.md`).
pub fn parse_native(text: &str) -> Result<Instance, ParseError> {
    let mut lines = meaningful_lines(text).peekable();
    let mut expect = |key: &str| -> Result<String, ParseError> {
        let (line_no, line) = lines
            .next()
            .ok_or_else(|| ParseError::MalformedHeader(format!("missing `{key}` line")))?;
        line.strip_prefix(key)
            .map(|rest| rest.trim().to_string())
            .ok_or(ParseError::MalformedLine {
                line: line_no,
                message: format!("expected `{key} ...`, found `{line}`"),
            })
    };
    let id = expect("instance")?;
    let origin_label = expect("origin")?;
    let origin = InstanceOrigin::from_label(&origin_label).ok_or_else(|| {
        ParseError::MalformedHeader(format!("unknown origin `{origin_label}`"))
    })?;
    let stack_count: usize = expect("stacks")?
        .parse()
        .map_err(|e| ParseError::MalformedHeader(format!("stacks: {e}")))?;
    let max_height: usize = expect("max_height")?
        .parse()
        .map_err(|e| ParseError::MalformedHeader(format!("max_height: {e}")))?;
    let mut stripped = Vec::new();
    for _ in 0..stack_count {
        let (line_no, line) = lines.next().ok_or_else(|| {
            ParseError::MalformedHeader(format!("expected {stack_count} stack lines"))
        })?;
        let rest = line.strip_prefix("stack").ok_or(ParseError::MalformedLine {
            line: line_no,
            message: format!("expected `stack <count> <ids>`, found `{line}`"),
        })?;
        stripped.push((line_no, rest.trim().to_string()));
    }
    let mut stack_lines = stripped.iter().map(|(n, l)| (*n, l.as_str()));
    let stacks = parse_stack_lines(&mut stack_lines, stack_count)?;
    for (i, stack) in stacks.iter().enumerate() {
        if stack.len() > max_height {
            return Err(ParseError::StackOverfilled {
                stack: i + 1,
                count: stack.len(),
                max: max_height,
            });
        }
    }
    let instance = Instance {
        id,
        stacks,
        max_height,
        weights: None,
        origin,
    };
    instance.validate_ids()?;
    let ids = instance.sorted_ids();
    let weights = parse_weight_section(&mut lines, &ids)?;
    if let Some((line_no, line)) = lines.next() {
        if line != "end" {
            return Err(ParseError::MalformedLine {
                line: line_no,
                message: format!("expected `end`, found `{line}`"),
            });
        }
    }
    if let Some((line_no, line)) = lines.next() {
        return Err(ParseError::MalformedLine {
            line: line_no,
            message: format!("unexpected trailing content `{line}`"),
        });
    }
    Ok(Instance { weights, ..instance })
}

/// Serialize to the native format; the exact inverse of [`parse_native`].
pub fn to_native(inst: &Instance) -> String {
    let mut out = String::new();
    writeln!(out, "instance {}", inst.id).unwrap();
    writeln!(out, "origin {}", inst.origin.label()).unwrap();
    writeln!(out, "stacks {}", inst.stack_count()).unwrap();
    writeln!(out, "max_height {}", inst.max_height).unwrap();
    for stack in &inst.stacks {
        let ids: Vec<String> = stack.iter().map(u32::to_string).collect();
        writeln!(out, "stack {} {}", stack.len(), ids.join(" ")).unwrap();
    }
    if let Some(weights) = &inst.weights {
        writeln!(out, "weights {}", weights.len()).unwrap();
        for (id, w) in weights {
            writeln!(out, "{id} {w}").unwrap();
        }
    }
    writeln!(out, "end").unwrap();
    out
}

/// Attach independent U[1, 30] container weights. The generator is a
/// SplitMix64 stream seeded with `seed XOR fnv1a64(instance id)`, drawing
/// one weight per container in ascending id order, so the same
/// `(instance id, seed)` pair always reproduces the same weights.
pub fn attach_weights(inst: &Instance, seed: u64) -> Result<Instance, ParseError> {
    if inst.weights.is_some() {
        return Err(ParseError::WeightsAlreadyPresent);
    }
    let mut rng = SplitMix64::new(seed ^ fnv1a64(inst.id.as_bytes()));
    let mut weights = BTreeMap::new();
    for id in inst.sorted_ids() {
        weights.insert(id, 1.0 + 29.0 * rng.next_f64());
    }
    Ok(Instance {
        weights: Some(weights),
        ..inst.clone()
    })
}

/// Shape family for generated training instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratedKind {
    /// 3-10 stacks, uniform fill of 3-10 containers, height limit fill+2.
    CasertaLike,
    /// 6-10 stacks, 15-69 containers dealt unevenly, explicit height limit.
    ZhuLike,
}

impl GeneratedKind {
    fn label(self) -> &'static str {
        match self {
            GeneratedKind::CasertaLike => "caserta-like",
            GeneratedKind::ZhuLike => "zhu-like",
        }
    }
}

/// Generate `count` seeded training instances with weights attached.
/// Layout draws come from a SplitMix64 stream over
/// `seed XOR fnv1a64(kind label)`; ids are a shuffled permutation of 1..=C.
pub fn generate_training_set(kind: GeneratedKind, count: usize, seed: u64) -> Vec<Instance> {
    let mut rng = SplitMix64::new(seed ^ fnv1a64(kind.label().as_bytes()));
    (0..count)
        .map(|index| {
            let id = format!("{}-{seed}-{index:05}", kind.label());
            let (stacks, max_height) = match kind {
                GeneratedKind::CasertaLike => {
                    // Reject shapes where a bottom target cannot be freed:
                    // the other S-1 stacks must be able to hold the C-1
                    // remaining containers, i.e. S*h - 1 <= (S-1)*(h+2),
                    // which reduces to h <= 2S - 1. Every published shape
                    // of this family satisfies it.
                    let (stack_count, fill) = loop {
                        let stack_count = 3 + rng.below(8) as usize;
                        let fill = 3 + rng.below(8) as usize;
                        if fill <= 2 * stack_count - 1 {
                            break (stack_count, fill);
                        }
                    };
                    let total = stack_count * fill;
                    let mut ids: Vec<u32> = (1..=total as u32).collect();
                    rng.shuffle(&mut ids);
                    let stacks = ids.chunks(fill).map(<[u32]>::to_vec).collect();
                    (stacks, fill + 2)
                }
                GeneratedKind::ZhuLike => {
                    let stack_count = 6 + rng.below(5) as usize;
                    let total = 15 + rng.below(55) as usize;
                    let cap = total.div_ceil(stack_count) + 1;
                    let mut ids: Vec<u32> = (1..=total as u32).collect();
                    rng.shuffle(&mut ids);
                    let mut stacks = vec![Vec::new(); stack_count];
                    for id in ids {
                        loop {
                            let s = rng.below(stack_count as u64) as usize;
                            if stacks[s].len() < cap {
                                stacks[s].push(id);
                                break;
                            }
                        }
                    }
                    (stacks, cap + 2)
                }
            };
            let bare = Instance {
                id,
                stacks,
                max_height,
                weights: None,
                origin: InstanceOrigin::Generated,
            };
            attach_weights(&bare, seed).expect("generated instances start without weights")
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset unavailable: {0}")]
    DatasetUnavailable(String),
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: ParseError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Sorted list of instance files under `dir` (recursive). Files named
/// `*.weights` are sidecars, not instances.
pub fn instance_paths(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
            if name.starts_with('.') {
                continue;
            }
            if path.is_dir() {
                walk(&path, out)?;
            } else if path.extension().and_then(|e| e.to_str()) != Some("weights") {
                out.push(path);
            }
        }
        Ok(())
    }
    if !dir.is_dir() {
        return Err(DatasetError::DatasetUnavailable(format!(
            "{} is not a directory",
            dir.display()
        )));
    }
    let mut paths = Vec::new();
    walk(dir, &mut paths).map_err(|source| DatasetError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    paths.sort();
    if paths.is_empty() {
        return Err(DatasetError::DatasetUnavailable(format!(
            "no instance files under {}",
            dir.display()
        )));
    }
    Ok(paths)
}

/// Load one instance file, sniffing the format: native (starts with
/// `instance`), Zhu (3-integer header) or Caserta (2-integer header).
/// Weights may be embedded as a trailing `weights` section or live in a
/// sidecar `<file>.weights` with one `<id> <weight>` pair per line.
pub fn load_instance_file(path: &Path) -> Result<Instance, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let parse = |text: &str| -> Result<Instance, ParseError> {
        let first = meaningful_lines(text).next().map(|(_, l)| l).unwrap_or("");
        if first.starts_with("instance") {
            return parse_native(text);
        }
        match int_fields(first).map(|f| f.len()) {
            Ok(3) => parse_zhu(text),
            _ => parse_caserta(text),
        }
    };
    let mut inst = parse(&text).map_err(|source| DatasetError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    if inst.id.is_empty() {
        inst.id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("instance")
            .to_string();
    }
    if inst.weights.is_none() {
        let sidecar = path.with_extension(format!(
            "{}.weights",
            path.extension().and_then(|e| e.to_str()).unwrap_or("dat")
        ));
        if sidecar.is_file() {
            let text = std::fs::read_to_string(&sidecar).map_err(|source| DatasetError::Io {
                path: sidecar.clone(),
                source,
            })?;
            let ids = inst.sorted_ids();
            let body = format!("weights {}\n{}", ids.len(), text);
            let mut lines = meaningful_lines(&body).peekable();
            let weights =
                parse_weight_section(&mut lines, &ids).map_err(|source| DatasetError::Parse {
                    path: sidecar.clone(),
                    source,
                })?;
            inst.weights = weights;
        }
    }
    Ok(inst)
}

/// Load a whole adapted dataset (layouts plus weights). Fails with
/// `DatasetUnavailable` when the directory is missing, empty, or any
/// instance lacks weights, so callers can skip loudly instead of comparing
/// against the wrong numbers.
pub fn load_adapted_dataset(dir: &Path) -> Result<Vec<Instance>, DatasetError> {
    let paths = instance_paths(dir)?;
    let mut instances = Vec::with_capacity(paths.len());
    for path in paths {
        let inst = load_instance_file(&path)?;
        if inst.weights.is_none() {
            return Err(DatasetError::DatasetUnavailable(format!(
                "{} has no container weights (embedded section or sidecar)",
                path.display()
            )));
        }
        instances.push(inst);
    }
    Ok(instances)
}
