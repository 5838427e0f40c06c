use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use blockgraph::algorithms::{self, PprParams, PprSource, UNREACHED};
use blockgraph::cache_lab::{self, AccessTrace, Policy, PolicyResult};
use blockgraph::graph::{ingest_binary, ingest_text, EDGE_LIST_MAGIC};
use blockgraph::image::BLOCK_EDGES;
use blockgraph::{Engine, ExecutionMode, MetricsReport, OpenImage, PartitionPlan, PriorityOrder, RunConfig};
use rand::seq::index::sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::args::*;
use crate::error::{CliError, CliResult};

/// Input-space ids of the dense vertices, kept next to the image.
const INPUT_IDS_FILE: &str = "input_ids.bin";

fn render(human: bool, v: &Value) -> String {
    if !human {
        return serde_json::to_string_pretty(v).expect("json") + "\n";
    }
    let mut out = String::new();
    if let Value::Object(m) = v {
        for (k, v) in m {
            let shown = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            out.push_str(&format!("{k:<22}{shown}\n"));
        }
    }
    out
}

fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

pub fn preprocess(a: &PreprocessArgs, human: bool) -> CliResult<String> {
    let plan = PartitionPlan {
        window_size: a.window,
        degree_threshold: a.degree_threshold,
        parallel_threads: a.partition_threads,
    };
    plan.validate()?;
    let start = Instant::now();
    let file = File::open(&a.input).map_err(|e| CliError::io(&a.input, e))?;
    let mut reader = BufReader::new(file);
    let format = match a.format {
        InputFormat::Auto => {
            let head = reader.fill_buf().map_err(|e| CliError::io(&a.input, e))?;
            if head.starts_with(EDGE_LIST_MAGIC) {
                InputFormat::Binary
            } else {
                InputFormat::Text
            }
        }
        f => f,
    };
    let ingested = match format {
        InputFormat::Binary => ingest_binary(reader, a.symmetrize)?,
        _ => ingest_text(reader, a.symmetrize)?,
    };
    let (built, _) = blockgraph::preprocess(&ingested.graph, &plan, &a.out)?;
    let ids: Vec<u8> = ingested.source_ids.iter().flat_map(|i| i.to_le_bytes()).collect();
    let ids_path = a.out.join(INPUT_IDS_FILE);
    std::fs::write(&ids_path, ids).map_err(|e| CliError::io(ids_path, e))?;

    let h = built.header;
    let blocks = built.placement.block_count() as u64;
    let slots = blocks * BLOCK_EDGES as u64;
    let frag_pct = if slots == 0 { 0.0 } else { 100.0 * built.fragmentation_edges() as f64 / slots as f64 };
    let mini_fraction = if h.n_original == 0 { 0.0 } else { h.n_mini as f64 / h.n_original as f64 };
    let summary = json!({
        "image": a.out.display().to_string(),
        "vertices": h.n_original,
        "edges": ingested.graph.num_edges(),
        "blocks": blocks,
        "oversized_runs": built.placement.spans.len(),
        "virtual_vertices": built.virtual_count(),
        "fragmentation_pct": frag_pct,
        "mini_vertices": h.n_mini,
        "mini_fraction": mini_fraction,
        "degree_threshold": h.degree_threshold,
        "elapsed_ms": start.elapsed().as_secs_f64() * 1e3,
    });
    Ok(render(human, &summary))
}

fn load_input_ids(image: &Path, n: usize) -> CliResult<Vec<u64>> {
    let path = image.join(INPUT_IDS_FILE);
    if !path.exists() {
        return Ok((0..n as u64).collect());
    }
    let bytes = read_file(&path)?;
    if bytes.len() != n * 8 {
        return Err(blockgraph::Error::Format(format!("{INPUT_IDS_FILE} holds {} bytes, expected {}", bytes.len(), n * 8)).into());
    }
    Ok(bytes.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect())
}

enum Values {
    Dist(Vec<u32>),
    Label(Vec<u64>),
    Flag(Vec<bool>),
    Real(Vec<f64>),
}

impl Values {
    fn to_json(&self) -> Value {
        match self {
            Values::Dist(v) => v.iter().map(|&d| if d == UNREACHED { Value::Null } else { d.into() }).collect(),
            Values::Label(v) => v.iter().map(|&x| Value::from(x)).collect(),
            Values::Flag(v) => v.iter().map(|&x| Value::from(x)).collect(),
            Values::Real(v) => v.iter().map(|&x| Value::from(x)).collect(),
        }
    }

    fn text(&self, i: usize) -> String {
        match self {
            Values::Dist(v) if v[i] == UNREACHED => "inf".into(),
            Values::Dist(v) => v[i].to_string(),
            Values::Label(v) => v[i].to_string(),
            Values::Flag(v) => (v[i] as u8).to_string(),
            Values::Real(v) => v[i].to_string(),
        }
    }

    fn len(&self) -> usize {
        match self {
            Values::Dist(v) => v.len(),
            Values::Label(v) => v.len(),
            Values::Flag(v) => v.len(),
            Values::Real(v) => v.len(),
        }
    }

    fn write(&self, path: &Path, format: OutputFormat, input_ids: &[u64]) -> CliResult<()> {
        let mut out = create(path)?;
        let res = (|| -> std::io::Result<()> {
            match format {
                OutputFormat::Text => {
                    for (i, id) in input_ids.iter().enumerate() {
                        writeln!(out, "{id} {}", self.text(i))?;
                    }
                }
                OutputFormat::Binary => match self {
                    Values::Dist(v) => v.iter().try_for_each(|x| out.write_all(&x.to_le_bytes()))?,
                    Values::Label(v) => v.iter().try_for_each(|x| out.write_all(&x.to_le_bytes()))?,
                    Values::Flag(v) => v.iter().try_for_each(|&x| out.write_all(&[x as u8]))?,
                    Values::Real(v) => v.iter().try_for_each(|x| out.write_all(&x.to_le_bytes()))?,
                },
            }
            out.flush()
        })();
        res.map_err(|e| CliError::io(path, e))
    }
}

fn per_run(path: &Path, source: Option<u64>, multi: bool) -> PathBuf {
    match (source, multi) {
        (Some(s), true) => {
            let mut name = path.file_name().unwrap_or_default().to_os_string();
            name.push(format!(".{s}"));
            path.with_file_name(name)
        }
        _ => path.to_path_buf(),
    }
}

fn pick_sources(a: &RunArgs, img: &OpenImage, input_ids: &[u64]) -> CliResult<Vec<u32>> {
    if !a.algorithm.needs_source() {
        if !a.sources.is_empty() || a.random_sources.is_some() {
            return Err(CliError::Usage(format!("{} takes no source", a.algorithm.name())));
        }
        return Ok(Vec::new());
    }
    if let Some(count) = a.random_sources {
        let ids = img.id_map()?;
        let mut candidates = Vec::new();
        for o in 0..input_ids.len() as u32 {
            if img.degree_of(ids.to_reordered(o)?)? > 0 {
                candidates.push(o);
            }
        }
        if count == 0 || count > candidates.len() {
            return Err(CliError::Usage(format!("cannot pick {count} sources among {} vertices with out-edges", candidates.len())));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        return Ok(sample(&mut rng, candidates.len(), count).into_iter().map(|i| candidates[i]).collect());
    }
    if a.sources.is_empty() {
        return Err(CliError::Usage(format!("{} needs --source or --random-sources", a.algorithm.name())));
    }
    a.sources
        .iter()
        .map(|s| {
            input_ids
                .binary_search(s)
                .map(|i| i as u32)
                .map_err(|_| CliError::Usage(format!("source {s} is not a vertex of the graph")))
        })
        .collect()
}

fn check_invariants(engine: &Engine<'_>) -> CliResult<()> {
    let c = engine.counters().snapshot();
    if c.activations != c.vertices_processed {
        return Err(CliError::Invariant(format!("{} activations but {} vertices processed", c.activations, c.vertices_processed)));
    }
    if c.blocks_loaded + c.blocks_reused != c.block_tasks {
        return Err(CliError::Invariant(format!(
            "{} loads + {} reuses != {} block tasks",
            c.blocks_loaded, c.blocks_reused, c.block_tasks
        )));
    }
    if let Some(bad) = engine.events().map(|e| e.illegal_transitions()).filter(|b| !b.is_empty()) {
        return Err(CliError::Invariant(format!("illegal block transition {:?}", bad[0])));
    }
    Ok(())
}

pub fn run(a: &RunArgs, human: bool) -> CliResult<String> {
    if !(a.buffer_mb.is_finite() && a.buffer_mb > 0.0) {
        return Err(CliError::Usage(format!("buffer size {} MB is not positive", a.buffer_mb)));
    }
    let sync = a.mode == Mode::Sync || a.algorithm == Algorithm::Mis;
    if a.trace_out.is_some() && !sync {
        return Err(CliError::Usage("--trace-out needs --mode sync".into()));
    }
    let config = RunConfig {
        threads: a.threads.unwrap_or_else(|| RunConfig::default().threads),
        buffer_bytes: (a.buffer_mb * (1 << 20) as f64) as u64,
        priority_order: match a.order {
            Order::Min => PriorityOrder::MinFirst,
            Order::Max => PriorityOrder::MaxFirst,
        },
        mode: match a.mode {
            Mode::Async => ExecutionMode::Async,
            Mode::Sync => ExecutionMode::Sync,
        },
        early_stop_threshold: a.early_stop,
        direct_io: a.direct_io,
        record_events: a.events_out.is_some(),
        ..RunConfig::default()
    };
    config.validate()?;
    let ppr_params = PprParams {
        alpha: a.alpha,
        r_max: a.r_max.unwrap_or(if a.algorithm == Algorithm::Pr { 1e-10 } else { 1e-9 }),
    };
    ppr_params.validate()?;

    let img = OpenImage::open(&a.image)?;
    let input_ids = load_input_ids(&a.image, img.header().n_original as usize)?;
    let sources = pick_sources(a, &img, &input_ids)?;
    let jobs: Vec<Option<u32>> = if sources.is_empty() { vec![None] } else { sources.into_iter().map(Some).collect() };
    let multi = jobs.len() > 1;

    let mut runs = Vec::new();
    let mut human_out = String::new();
    for job in jobs {
        let source_id = job.map(|s| input_ids[s as usize]);
        let mut engine = Engine::new(&img, config.clone())?;
        if a.trace_out.is_some() {
            engine.enable_block_trace();
        }
        let start = Instant::now();
        let mut summary = Map::new();
        let (values, rounds) = match a.algorithm {
            Algorithm::Bfs => {
                let d = algorithms::bfs(&engine, job.unwrap())?;
                let reached: Vec<u32> = d.iter().copied().filter(|&x| x != UNREACHED).collect();
                summary.insert("reached".into(), reached.len().into());
                summary.insert("max_depth".into(), reached.iter().max().copied().into());
                (Values::Dist(d), None)
            }
            Algorithm::Wcc => {
                let l = algorithms::wcc(&engine)?;
                let roots = l.iter().enumerate().filter(|&(i, &x)| i as u32 == x).count();
                summary.insert("components".into(), roots.into());
                (Values::Label(l.iter().map(|&x| input_ids[x as usize]).collect()), None)
            }
            Algorithm::Kcore => {
                let r = algorithms::kcore(&engine, a.k)?;
                summary.insert("k".into(), a.k.into());
                summary.insert("core_size".into(), r.in_core.iter().filter(|&&x| x).count().into());
                (Values::Flag(r.in_core), None)
            }
            Algorithm::Ppr | Algorithm::Pr => {
                let source = job.map_or(PprSource::Uniform, PprSource::Vertex);
                let r = algorithms::ppr(&engine, source, ppr_params)?;
                summary.insert("alpha".into(), ppr_params.alpha.into());
                summary.insert("r_max".into(), ppr_params.r_max.into());
                summary.insert("estimate_sum".into(), r.estimate.iter().sum::<f64>().into());
                summary.insert("residual_sum".into(), r.residual.iter().sum::<f64>().into());
                (Values::Real(r.estimate), None)
            }
            Algorithm::Mis => {
                let r = algorithms::mis(&engine, a.seed)?;
                summary.insert("seed".into(), a.seed.into());
                summary.insert("set_size".into(), r.in_set.iter().filter(|&&x| x).count().into());
                (Values::Flag(r.in_set), Some(r.rounds))
            }
        };
        let elapsed = start.elapsed();
        check_invariants(&engine)?;
        let mut report = MetricsReport::new(a.algorithm.name(), elapsed, engine.counters().snapshot());
        report.rounds = rounds.or((config.mode == ExecutionMode::Sync).then(|| engine.rounds()));

        if let Some(path) = &a.trace_out {
            let path = per_run(path, source_id, multi);
            let trace = AccessTrace::new(engine.block_trace().unwrap_or_default())?;
            std::fs::write(&path, trace.encode()).map_err(|e| CliError::io(&path, e))?;
        }
        if let (Some(path), Some(log)) = (&a.events_out, engine.events()) {
            let path = per_run(path, source_id, multi);
            let mut out = create(&path)?;
            log.write_json_lines(&mut out).and_then(|_| out.flush()).map_err(|e| CliError::io(&path, e))?;
        }

        let mut entry = Map::new();
        if let Some(s) = source_id {
            entry.insert("source".into(), s.into());
        }
        entry.insert("summary".into(), Value::Object(summary.clone()));
        entry.insert("metrics".into(), serde_json::to_value(&report).expect("report"));
        if let Some(path) = &a.output {
            let path = per_run(path, source_id, multi);
            values.write(&path, a.output_format, &input_ids)?;
            entry.insert("output".into(), path.display().to_string().into());
        } else if !human {
            entry.insert("result".into(), values.to_json());
        }
        if human {
            if let Some(s) = source_id {
                human_out.push_str(&format!("{:<24}{s}\n", "source"));
            }
            for (k, v) in &summary {
                human_out.push_str(&format!("{k:<24}{v}\n"));
            }
            human_out.push_str(&report.to_text());
            match &a.output {
                Some(_) => human_out.push_str(&format!("{:<24}{}\n", "output", entry["output"].as_str().unwrap())),
                None => {
                    human_out.push('\n');
                    for (i, id) in input_ids.iter().enumerate().take(values.len()) {
                        human_out.push_str(&format!("{id}\t{}\n", values.text(i)));
                    }
                }
            }
            human_out.push('\n');
        }
        runs.push(Value::Object(entry));
    }
    if human {
        return Ok(human_out);
    }
    let out = json!({
        "algorithm": a.algorithm.name(),
        "image": a.image.display().to_string(),
        "config": serde_json::to_value(&config).expect("config"),
        "runs": runs,
    });
    Ok(render(false, &out))
}

pub fn simulate_cache(a: &SimulateArgs, human: bool) -> CliResult<String> {
    let mut capacities = a.capacities.clone();
    if let Some(list) = &a.capacity_sweep {
        capacities.extend(parse_sweep(list).map_err(CliError::Usage)?);
    }
    if capacities.is_empty() {
        return Err(CliError::Usage("give --capacity or --capacity-sweep".into()));
    }
    let trace = AccessTrace::decode(&read_file(&a.trace)?)?;
    let policies: Vec<Policy> = match a.policy {
        PolicyArg::Opt => vec![Policy::Opt],
        PolicyArg::Lru => vec![Policy::Lru],
        PolicyArg::Sub => vec![Policy::Sub],
        PolicyArg::All => Policy::ALL.to_vec(),
    };
    let mut rows: Vec<PolicyResult> = Vec::new();
    for &c in &capacities {
        for &p in &policies {
            rows.push(cache_lab::simulate(&trace, p, c, a.seed)?);
        }
    }
    let mut out = String::new();
    if human {
        out.push_str(&format!("{:<8}{:>10}{:>12}{:>16}\n", "policy", "capacity", "misses", "bytes"));
        for r in &rows {
            out.push_str(&format!("{:<8}{:>10}{:>12}{:>16}\n", r.policy.to_string(), r.capacity, r.misses, r.bytes));
        }
    } else {
        out.push_str(PolicyResult::CSV_HEADER);
        out.push('\n');
        for r in &rows {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn stats(a: &StatsArgs, human: bool) -> CliResult<String> {
    if let Some(path) = &a.trace {
        let trace = AccessTrace::decode(&read_file(path)?)?;
        let iterations = trace.entries().last().map_or(0, |e| e.0 as u64 + 1);
        let v = json!({
            "trace": path.display().to_string(),
            "requests": trace.len(),
            "distinct_blocks": trace.distinct_blocks(),
            "iterations": iterations,
        });
        return Ok(render(human, &v));
    }
    let dir = a.image.as_ref().expect("clap group requires one of image/trace");
    let img = OpenImage::open(dir)?;
    let h = *img.header();
    let mut virtual_vertices = 0u64;
    for v in 0..img.n_reordered() {
        virtual_vertices += img.is_virtual(v)? as u64;
    }
    let mut oversized = 0u64;
    let mut b = 0;
    while b < img.block_count() {
        let pages = img.block_pages(b).max(1) as u32;
        oversized += (pages > 1) as u64;
        b += pages;
    }
    let v = json!({
        "image": dir.display().to_string(),
        "vertices": h.n_original,
        "large_vertices": h.n_reordered - virtual_vertices,
        "virtual_vertices": virtual_vertices,
        "mini_vertices": h.n_mini,
        "mini_fraction": if h.n_original == 0 { 0.0 } else { h.n_mini as f64 / h.n_original as f64 },
        "degree_threshold": h.degree_threshold,
        "blocks": h.block_count,
        "oversized_runs": oversized,
        "block_bytes": h.block_count * 4096,
        "edges": h.edge_count,
        "mini_edges": img.mini_index().total_edges(),
        "theta": img.theta().bounds(),
    });
    Ok(render(human, &v))
}
