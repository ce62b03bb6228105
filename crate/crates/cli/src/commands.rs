//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use topg_core::density::{response_map, update_model, ForegroundModel};
use topg_core::evaluation::{
    check_appendix_instances, evaluate_track, load_sequence, parse_attributes, recall_curve,
    sre_perturbations, synth_sequence, Sequence, SynthSpec, TrackEval,
};
use topg_core::imaging::{load_image, BoundingBox, ImageBuffer};
use topg_core::pipeline::{analyze_frame, fit_model};
use topg_core::proposals::{Proposal, TargetSpec};
use topg_core::ranking::rank_proposals;
use topg_core::tracking::{format_track_csv, init_tracker, track_frames, TrackRecord};

use crate::config::RunConfig;
use crate::output::{emit, overlay, proposals_csv, ranked_csv, read_proposals};
use crate::{ExitClass, Failure};

type CmdResult = Result<(), Failure>;

/// Threads for multi-sequence commands; `TOPG_NO_PARALLEL=1` forces one.
pub fn worker_count(jobs: Option<usize>) -> usize {
    if std::env::var("TOPG_NO_PARALLEL").is_ok_and(|v| v == "1") {
        return 1;
    }
    jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure {
            code: 1,
            error: e.into(),
        })?;
    Ok(pool.install(f))
}

fn parse_box(text: &str, flag: &str) -> Result<BoundingBox, Failure> {
    text.parse::<BoundingBox>()
        .map_err(|e| anyhow!("{flag}: {e}"))
        .usage()
}

fn open_sequence(dir: &Path) -> Result<Sequence, Failure> {
    load_sequence(dir).data()
}

fn load_frame(path: &Path) -> Result<ImageBuffer, Failure> {
    load_image(path)
        .with_context(|| format!("cannot load frame {}", path.display()))
        .data()
}

fn load_frames(seq: &Sequence) -> Result<Vec<ImageBuffer>, Failure> {
    seq.frames.iter().map(|p| load_frame(p)).collect()
}

/// The explicit box if given, else the first ground-truth box.
fn initial_box(seq: &Sequence, dir: &Path, explicit: Option<&str>, flag: &str) -> Result<BoundingBox, Failure> {
    match explicit {
        Some(text) => parse_box(text, flag),
        None => seq
            .require_ground_truth(dir)
            .data()?
            .first()
            .copied()
            .ok_or_else(|| anyhow!("{} is empty", dir.display()))
            .data(),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .data()
}

fn save(img: &ImageBuffer, path: PathBuf) -> Result<(), Failure> {
    img.save_pnm(&path)
        .with_context(|| format!("cannot write {}", path.display()))
        .data()
}

#[derive(Default, Clone, Copy)]
struct Dumps<'a> {
    response: Option<&'a Path>,
    edges: Option<&'a Path>,
}

struct FrameProposals {
    fused: Vec<Proposal>,
    ranked: Vec<Proposal>,
}

/// Proposals for every frame. Frame 1 is searched around `init`; later
/// frames around the previous ground-truth box when annotations exist,
/// otherwise around `init`. The color model is fitted on frame 1 and
/// refreshed every `kappa` frames at the best known target box.
fn sequence_proposals(
    config: &RunConfig,
    seq: &Sequence,
    init: BoundingBox,
    dumps: Dumps<'_>,
) -> Result<Vec<FrameProposals>, Failure> {
    let pc = &config.tracker.pipeline;
    let gt = seq.ground_truth.as_deref();
    let mut out = Vec::with_capacity(seq.frames.len());
    let mut model: Option<ForegroundModel> = None;
    let mut rho_t = 0.0;
    for (t, path) in seq.frames.iter().enumerate() {
        let frame = load_frame(path)?;
        let m = t + 1;
        let anchor = match (t, gt) {
            (0, _) => init,
            (_, Some(g)) if t - 1 < g.len() => g[t - 1],
            _ => init,
        };
        let current = match &model {
            Some(model) => model.clone(),
            None => {
                let fitted = fit_model(&frame, &init, pc).data()?;
                rho_t = analyze_frame(&frame, &fitted, &init, pc).data()?.frame_rho(&init);
                model = Some(fitted.clone());
                fitted
            }
        };
        let analysis = analyze_frame(&frame, &current, &anchor, pc).data()?;
        let target = TargetSpec::new(anchor, rho_t);
        let fused = analysis.fused(&target, &pc.gen);
        let ranked = analysis.rank(&fused, &target, &pc.affinity);
        if let Some(dir) = dumps.response {
            save(&analysis.response.to_image(), dir.join(format!("response_{m:04}.pgm")))?;
        }
        if let Some(dir) = dumps.edges {
            save(&analysis.frame_edges.edges.to_image(), dir.join(format!("frame_edges_{m:04}.pgm")))?;
            save(
                &analysis.response_edges.edges.to_image(),
                dir.join(format!("response_edges_{m:04}.pgm")),
            )?;
        }
        if m > 1 && (m - 1) % config.tracker.kappa == 0 {
            let known = gt.and_then(|g| g.get(t).copied()).unwrap_or(anchor);
            if let Ok(fresh) = fit_model(&frame, &known, pc) {
                model = Some(update_model(&fresh, &current, config.tracker.lambda).data()?);
                rho_t = analysis.frame_rho(&known);
            }
        }
        out.push(FrameProposals { fused, ranked });
    }
    Ok(out)
}

pub fn propose(
    config: &RunConfig,
    dir: &Path,
    init: Option<&str>,
    out: Option<&Path>,
    dump_response: Option<&Path>,
    dump_edges: Option<&Path>,
) -> CmdResult {
    let seq = open_sequence(dir)?;
    let init = initial_box(&seq, dir, init, "--init")?;
    for d in [dump_response, dump_edges].into_iter().flatten() {
        ensure_dir(d)?;
    }
    let dumps = Dumps {
        response: dump_response,
        edges: dump_edges,
    };
    let frames = sequence_proposals(config, &seq, init, dumps)?;
    let rows: Vec<(usize, Vec<Proposal>)> = frames
        .into_iter()
        .enumerate()
        .map(|(i, f)| (i + 1, f.fused))
        .collect();
    emit(out, &proposals_csv(&rows)).data()
}

pub fn rank(
    config: &RunConfig,
    dir: &Path,
    proposals: &Path,
    target: Option<&str>,
    rho_t: Option<f64>,
    out: Option<&Path>,
) -> CmdResult {
    let pc = &config.tracker.pipeline;
    let seq = open_sequence(dir)?;
    let target = initial_box(&seq, dir, target, "--target")?;
    let lists = read_proposals(proposals).data()?;
    let first = load_frame(&seq.frames[0])?;
    let model = fit_model(&first, &target, pc).data()?;
    let rho_t = match rho_t {
        Some(r) => r,
        None => analyze_frame(&first, &model, &target, pc).data()?.frame_rho(&target),
    };
    let spec = TargetSpec::new(target, rho_t);
    let mut ranked = Vec::with_capacity(lists.len());
    for (frame_id, list) in lists {
        let path = frame_id
            .checked_sub(1)
            .and_then(|i| seq.frames.get(i))
            .ok_or_else(|| anyhow!("frame {frame_id} not in {}", dir.display()))
            .data()?;
        let frame = load_frame(path)?;
        let response = response_map(&frame, &model).data()?;
        ranked.push((frame_id, rank_proposals(&list, &spec, &response, &pc.affinity)));
    }
    emit(out, &ranked_csv(&ranked)).data()
}

pub fn track(
    config: &RunConfig,
    dir: &Path,
    init: Option<&str>,
    out: Option<&Path>,
    dump_overlays: Option<&Path>,
) -> CmdResult {
    let seq = open_sequence(dir)?;
    let init = initial_box(&seq, dir, init, "--init")?;
    if let Some(d) = dump_overlays {
        ensure_dir(d)?;
    }
    let first = load_frame(&seq.frames[0])?;
    let mut state = init_tracker(&first, &init, config.tracker.clone()).data()?;
    let mut records = vec![TrackRecord {
        frame_id: 1,
        bbox: init,
        score: 1.0,
        lost: false,
    }];
    if let Some(d) = dump_overlays {
        save(&overlay(&first, &init, 3), d.join("0001.ppm"))?;
    }
    drop(first);
    for path in &seq.frames[1..] {
        let frame = load_frame(path)?;
        let r = state.step(&frame).data()?;
        let frame_id = state.frame_index();
        records.push(TrackRecord {
            frame_id,
            bbox: r.bbox,
            score: r.score,
            lost: r.lost,
        });
        if let Some(d) = dump_overlays {
            save(&overlay(&frame, &r.bbox, 3), d.join(format!("{frame_id:04}.ppm")))?;
        }
    }
    emit(out, &format_track_csv(&records)).data()
}

fn parse_budgets(text: &str) -> Result<Vec<usize>, Failure> {
    let budgets: Vec<usize> = text
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| anyhow!("--budgets: {e}"))
        .usage()?;
    if budgets.is_empty() || budgets.contains(&0) {
        return Err(anyhow!("--budgets must list positive counts")).usage();
    }
    Ok(budgets)
}

#[derive(Serialize)]
struct SequenceRecall {
    name: String,
    frames: usize,
    recall: Vec<f64>,
}

#[derive(Serialize)]
struct RecallSummary {
    iou_threshold: f64,
    budgets: Vec<usize>,
    mean_recall: Vec<f64>,
    sequences: Vec<SequenceRecall>,
}

pub fn eval_recall(
    config: &RunConfig,
    dirs: &[PathBuf],
    budgets: &str,
    iou: f64,
    out: Option<&Path>,
    json: Option<&Path>,
    jobs: usize,
) -> CmdResult {
    let budgets = parse_budgets(budgets)?;
    if !(iou > 0.0 && iou <= 1.0) {
        return Err(anyhow!("--iou must lie in (0, 1]")).usage();
    }
    // fail fast on missing inputs before any heavy work
    let mut sequences = Vec::with_capacity(dirs.len());
    for dir in dirs {
        let seq = open_sequence(dir)?;
        let gt = seq.require_ground_truth(dir).data()?.to_vec();
        if gt.len() < seq.frames.len() {
            return Err(anyhow!(
                "{}: {} ground-truth boxes for {} frames",
                dir.display(),
                gt.len(),
                seq.frames.len()
            ))
            .data();
        }
        sequences.push((seq, gt));
    }
    let results: Vec<Result<SequenceRecall, Failure>> = in_pool(jobs, || {
        sequences
            .par_iter()
            .map(|(seq, gt)| {
                let frames = sequence_proposals(config, seq, gt[0], Dumps::default())?;
                let lists: Vec<Vec<BoundingBox>> = frames
                    .iter()
                    .map(|f| f.ranked.iter().map(|p| p.bbox).collect())
                    .collect();
                let curve = recall_curve(&lists, &gt[..lists.len()], iou, &budgets).data()?;
                Ok(SequenceRecall {
                    name: seq.name.clone(),
                    frames: lists.len(),
                    recall: curve.recall,
                })
            })
            .collect()
    })?;
    let per_seq: Vec<SequenceRecall> = results.into_iter().collect::<Result<_, _>>()?;
    let n = per_seq.len() as f64;
    let mean: Vec<f64> = (0..budgets.len())
        .map(|k| per_seq.iter().map(|s| s.recall[k]).sum::<f64>() / n)
        .collect();
    let mut csv = String::from("budget,recall\n");
    for (b, r) in budgets.iter().zip(&mean) {
        csv.push_str(&format!("{b},{r}\n"));
    }
    emit(out, &csv).data()?;
    if let Some(path) = json {
        let summary = RecallSummary {
            iou_threshold: iou,
            budgets,
            mean_recall: mean,
            sequences: per_seq,
        };
        emit(Some(path), &(serde_json::to_string_pretty(&summary).data()? + "\n")).data()?;
    }
    Ok(())
}

#[derive(Serialize, Clone, Copy)]
struct Scores {
    dp: f64,
    success_rate: f64,
    success_auc: f64,
}

impl Scores {
    fn mean<'a>(items: impl IntoIterator<Item = &'a Scores>) -> Scores {
        let items: Vec<&Scores> = items.into_iter().collect();
        let n = items.len().max(1) as f64;
        Scores {
            dp: items.iter().map(|s| s.dp).sum::<f64>() / n,
            success_rate: items.iter().map(|s| s.success_rate).sum::<f64>() / n,
            success_auc: items.iter().map(|s| s.success_auc).sum::<f64>() / n,
        }
    }
}

impl From<TrackEval> for Scores {
    fn from(e: TrackEval) -> Self {
        Scores {
            dp: e.dp,
            success_rate: e.success_rate,
            success_auc: e.success_auc,
        }
    }
}

#[derive(Serialize)]
struct SequenceScores {
    name: String,
    #[serde(flatten)]
    ope: Scores,
    #[serde(skip_serializing_if = "Option::is_none")]
    sre: Option<Scores>,
}

#[derive(Serialize)]
struct TrackingSummary {
    dp: f64,
    success_rate: f64,
    success_auc: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    sre: Option<Scores>,
    sequences: Vec<SequenceScores>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    attributes: BTreeMap<String, Scores>,
}

fn run_and_score(
    config: &RunConfig,
    frames: &[ImageBuffer],
    gt: &[BoundingBox],
    init: &BoundingBox,
) -> Result<Scores, Failure> {
    let records = track_frames(frames, init, config.tracker.clone()).data()?;
    let track: Vec<BoundingBox> = records.iter().map(|r| r.bbox).collect();
    Ok(evaluate_track(&track, gt).data()?.into())
}

pub fn eval_tracking(
    config: &RunConfig,
    dirs: &[PathBuf],
    attributes: Option<&Path>,
    sre: bool,
    out: Option<&Path>,
    jobs: usize,
) -> CmdResult {
    let attrs = match attributes {
        Some(path) => parse_attributes(
            &fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))
                .data()?,
        ),
        None => BTreeMap::new(),
    };
    let mut sequences = Vec::with_capacity(dirs.len());
    for dir in dirs {
        let seq = open_sequence(dir)?;
        let gt = seq.require_ground_truth(dir).data()?.to_vec();
        if gt.len() != seq.frames.len() {
            return Err(anyhow!(
                "{}: {} ground-truth boxes for {} frames",
                dir.display(),
                gt.len(),
                seq.frames.len()
            ))
            .data();
        }
        sequences.push((seq, gt));
    }
    let results: Vec<Result<SequenceScores, Failure>> = in_pool(jobs, || {
        sequences
            .par_iter()
            .map(|(seq, gt)| {
                let frames = load_frames(seq)?;
                let ope = run_and_score(config, &frames, gt, &gt[0])?;
                let sre = if sre {
                    let (w, h) = (frames[0].width(), frames[0].height());
                    let runs = sre_perturbations(&gt[0], w, h)
                        .iter()
                        .map(|init| run_and_score(config, &frames, gt, init))
                        .collect::<Result<Vec<_>, _>>()?;
                    Some(Scores::mean(&runs))
                } else {
                    None
                };
                Ok(SequenceScores {
                    name: seq.name.clone(),
                    ope,
                    sre,
                })
            })
            .collect()
    })?;
    let per_seq: Vec<SequenceScores> = results.into_iter().collect::<Result<_, _>>()?;
    let overall = Scores::mean(per_seq.iter().map(|s| &s.ope));
    let sre_mean = sre.then(|| Scores::mean(per_seq.iter().filter_map(|s| s.sre.as_ref())));
    let mut by_attr: BTreeMap<String, Vec<Scores>> = BTreeMap::new();
    for s in &per_seq {
        for a in attrs.get(&s.name).into_iter().flatten() {
            by_attr.entry(a.clone()).or_default().push(s.ope);
        }
    }
    let summary = TrackingSummary {
        dp: overall.dp,
        success_rate: overall.success_rate,
        success_auc: overall.success_auc,
        sre: sre_mean,
        sequences: per_seq,
        attributes: by_attr
            .into_iter()
            .map(|(k, v)| (k, Scores::mean(&v)))
            .collect(),
    };
    emit(out, &(serde_json::to_string_pretty(&summary).data()? + "\n")).data()
}

pub fn synth(config: &RunConfig, kind: &str, out: &Path, length: Option<usize>) -> CmdResult {
    let seed = config.tracker.seed;
    let specs: Vec<(PathBuf, SynthSpec)> = if kind == "suite" {
        SynthSpec::degradation_suite(seed)
            .into_iter()
            .enumerate()
            .map(|(i, s)| (out.join(format!("seq_{:02}", i + 1)), s))
            .collect()
    } else {
        let spec = SynthSpec::preset(kind, seed)
            .ok_or_else(|| {
                anyhow!("unknown kind {kind:?} (plain, low-contrast, blur, noise, occlusion, suite)")
            })
            .usage()?;
        vec![(out.to_path_buf(), spec)]
    };
    for (i, (dir, mut spec)) in specs.into_iter().enumerate() {
        if let Some(n) = length {
            spec.length = n;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let seq = synth_sequence(&spec, &mut rng).usage()?;
        seq.write_otb(&dir)
            .with_context(|| format!("cannot write {}", dir.display()))
            .data()?;
    }
    Ok(())
}

pub fn appendix_check(config: &RunConfig, trials: usize) -> CmdResult {
    let mut rng = ChaCha8Rng::seed_from_u64(config.tracker.seed);
    let (satisfied, total) = check_appendix_instances(&mut rng, trials);
    println!("{satisfied}/{total} instances satisfy p_d<0");
    if satisfied == total {
        Ok(())
    } else {
        Err(anyhow!("{} instances violate p_d<0", total - satisfied)).data()
    }
}
