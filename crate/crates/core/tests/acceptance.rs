//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line for
//! each and exits non-zero if any failed.

mod support;

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use support::{union_area_in_rect, Circle};
use vdga::geometry::{coverage_fraction, pair_overlap, voronoi, Disk, Point, RegionOfInterest};
use vdga::harness::{
    compare_baselines, compare_centralized_distributed, compare_mutation_variants, median, median_reached,
    run_centralized, run_distributed, Baseline, ExperimentSpec,
};
use vdga::optimizer::{apply_mutation, Chromosome, GaConfig};
use vdga::protocol::{
    chromosomes_per_frame, decode_coverage, decode_frame, encode_frame, encode_result, segment_subpopulation, Action,
    Frame, FrameKind, NodeEvent, ProtocolError, Timing, VNode, VNodeConfig, VPhase, MAX_PAYLOAD,
};
use vdga::seeding::partition;
use vdga::simnet::{run_session, SessionConfig, SimEvent};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn roi() -> RegionOfInterest {
    RegionOfInterest::new(80.0, 80.0).unwrap()
}

fn geometry_oracle() -> Outcome {
    let fine = RegionOfInterest::with_raster_step(80.0, 80.0, 0.1).unwrap();
    let single = coverage_fraction(&[Disk::new(Point::new(40.0, 40.0), 10.0)], &fine);
    check((single - 0.0491).abs() <= 0.002, format!("single disk {single:.5}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst, mut slowest) = (0.0f64, 0.0f64);
    for case in 0..60 {
        let k = 1 + case % 3;
        let cs: Vec<Circle> = (0..k)
            .map(|_| Circle::new(rng.gen_range(-5.0..85.0), rng.gen_range(-5.0..85.0), rng.gen_range(2.0..20.0)))
            .collect();
        let disks: Vec<Disk> = cs.iter().map(|c| Disk::new(Point::new(c.x, c.y), c.r)).collect();
        let t = Instant::now();
        let raster = coverage_fraction(&disks, &fine);
        slowest = slowest.max(t.elapsed().as_secs_f64());
        let exact = union_area_in_rect(&cs, 80.0, 80.0) / 6400.0;
        worst = worst.max((raster - exact).abs());
    }
    check(worst <= 0.005, format!("worst error {worst:.5}"))?;
    check(slowest < 1.0, format!("slowest case {slowest:.3} s"))?;
    Ok(format!("single disk {single:.4}, worst error {worst:.5} over 60 cases, slowest {:.1} ms", slowest * 1e3))
}

fn voronoi_tiling() -> Outcome {
    let fine = RegionOfInterest::with_raster_step(80.0, 80.0, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut worst_area, mut worst_agree) = (0.0f64, 1.0f64);
    let (nx, ny) = fine.grid_dims();
    for _ in 0..100 {
        let seeds: Vec<Point> = (0..20).map(|_| fine.sample_interior(&mut rng)).collect();
        let cells = voronoi(&seeds, &fine).map_err(|e| e.to_string())?;
        let total: f64 = cells.iter().map(|c| c.area()).sum();
        worst_area = worst_area.max((total - 6400.0).abs() / 6400.0);
        let mut agree = 0usize;
        for i in 0..nx {
            for j in 0..ny {
                let p = Point::new((i as f64 + 0.5) * 0.1, (j as f64 + 0.5) * 0.1);
                let k = (0..seeds.len()).min_by(|&a, &b| p.dist2(seeds[a]).total_cmp(&p.dist2(seeds[b]))).unwrap();
                if cells[k].contains(p, 1e-9) {
                    agree += 1;
                }
            }
        }
        worst_agree = worst_agree.min(agree as f64 / (nx * ny) as f64);
    }
    check(worst_area <= 1e-6, format!("area error {worst_area:e}"))?;
    check(worst_agree >= 0.995, format!("raster agreement {worst_agree:.5}"))?;
    Ok(format!("worst relative area error {worst_area:.1e}, lowest raster agreement {:.4}%", worst_agree * 100.0))
}

fn drive_to_collecting(v: &mut VNode) {
    let mut pending: Vec<Action> = v.step(0, NodeEvent::Start);
    while let Some(a) = pending.pop() {
        if let Action::Send { to, frame } = a {
            if frame.kind == FrameKind::Spf {
                pending.extend(v.step(0, NodeEvent::Frame { from: to, frame: Frame::ack_of(to, &frame) }));
            }
        }
    }
}

fn micro_examples() -> Outcome {
    let x = pair_overlap(&Disk::new(Point::new(0.0, 0.0), 10.0), &Disk::new(Point::new(12.0, 0.0), 10.0))
        .map_err(|e| e.to_string())?;
    check(x == 8.0, format!("overlap {x}"))?;

    let xs = [30.0, 66.0, 78.0, 21.0, 84.0, 59.0, 3.0, 18.0, 43.0, 51.0];
    let ys = [7.0, 73.0, 33.0, 78.0, 29.0, 10.0, 61.0, 47.0, 72.0, 6.0];
    let c = Chromosome::new(xs.iter().zip(ys).map(|(&x, y)| Point::new(x, y)).collect());
    let fixed = |m: &Chromosome| (0..10).filter(|&i| m.positions[i] == c.positions[i]).count();
    check(c.positions[4] == Point::new(84.0, 29.0), "node 5 is not at (84,29)")?;
    let one = apply_mutation(&c, &[(4, Point::new(24.0, 53.0))]);
    check(one.positions[4] == Point::new(24.0, 53.0) && fixed(&one) == 9, "one-point mutation")?;
    let two = apply_mutation(&c, &[(1, Point::new(29.0, 79.0)), (7, Point::new(68.0, 32.0))]);
    check(
        two.positions[1] == Point::new(29.0, 79.0) && two.positions[7] == Point::new(68.0, 32.0) && fixed(&two) == 8,
        "two-point mutation",
    )?;

    let islands = partition(&(0..300).collect::<Vec<u32>>(), 10);
    check(islands.len() == 10 && islands.iter().all(|i| i.len() == 30), "partition of 300 over 10")?;

    let cfg = VNodeConfig { g_nodes: 10, n_objects: 10, result_threshold: 0.8, timing: Timing::default() };
    let subs: Vec<Vec<Chromosome>> = (0..10).map(|_| vec![c.clone(), c.clone()]).collect();
    let mut v = VNode::new(cfg, &subs).map_err(|e| e.to_string())?;
    drive_to_collecting(&mut v);
    check(v.phase() == VPhase::Collecting, format!("coordinator stuck in {:?}", v.phase()))?;
    let mut fired_at = None;
    for node in 1..=10u8 {
        let payload = encode_result(&c, 8000 + node as u16).map_err(|e| e.to_string())?;
        v.step(100, NodeEvent::Frame { from: node, frame: Frame::data(FrameKind::Rf, node, 0, 1, payload) });
        if fired_at.is_none() && v.decision().is_some() {
            fired_at = Some(node);
        }
    }
    check(fired_at == Some(8), format!("decision after RF {fired_at:?}"))?;
    Ok("overlap 8, one- and two-point mutations, 10 islands of 30, decision at the 8th of 10 results".into())
}

fn baseline_spec(target: f64, max_generations: u64) -> ExperimentSpec {
    ExperimentSpec {
        ga: GaConfig { coverage_target: target, max_generations, ..GaConfig::default() },
        ..ExperimentSpec::default()
    }
}

fn ga_convergence() -> Outcome {
    let t = Instant::now();
    let spec = baseline_spec(0.90, 1500);
    let mut finals = Vec::new();
    for rep in 0..30 {
        let (_, run) = run_centralized(&spec, rep).map_err(|e| e.to_string())?;
        let monotone = run.history.windows(2).all(|w| w[1].best_coverage >= w[0].best_coverage);
        check(monotone, format!("run {rep}: best-coverage trace decreases"))?;
        finals.push(run.best_coverage);
    }
    let elapsed = t.elapsed().as_secs_f64();
    let med = median(&finals);
    let reached = finals.iter().filter(|&&c| c >= 0.90).count();
    let detail = format!("median best coverage {med:.4}, {reached}/30 runs reached 0.90, {elapsed:.0} s");
    check(elapsed < 600.0, format!("too slow: {detail}"))?;
    check(med >= 0.90, detail.clone())?;
    Ok(detail)
}

fn hybrid_dominance() -> Outcome {
    let spec = ExperimentSpec { baselines: Baseline::ALL.to_vec(), ..baseline_spec(1.0, 200) };
    let report = compare_baselines(&spec).map_err(|e| e.to_string())?;
    let cov =
        |label: &str| -> Vec<f64> { report.records.iter().filter(|r| r.label == label).map(|r| r.coverage).collect() };
    let (vdga, ga, vd) = (cov("vd-ga"), cov("ga"), cov("vd"));
    let share = |other: &[f64]| vdga.iter().zip(other).filter(|(a, b)| a >= b).count() as f64 / vdga.len() as f64;
    let (over_ga, over_vd) = (share(&ga), share(&vd));
    let detail = format!(
        "vd-ga >= ga in {:.0}% of pairs, >= vd in {:.0}% (medians vd-ga {:.4}, ga {:.4}, vd {:.4})",
        over_ga * 100.0,
        over_vd * 100.0,
        median(&vdga),
        median(&ga),
        median(&vd)
    );
    check(over_ga >= 0.7 && over_vd >= 0.7, detail.clone())?;
    Ok(detail)
}

fn distributed_direction() -> Outcome {
    let spec = ExperimentSpec { g_nodes: 6, ..baseline_spec(0.90, 1500) };
    let report = compare_centralized_distributed(&spec).map_err(|e| e.to_string())?;
    let times = |label: &str| -> Vec<Option<u64>> {
        report.records.iter().filter(|r| r.label == label).map(|r| r.time_to_target_ms).collect()
    };
    let (c, d) = (median_reached(&times("centralized")), median_reached(&times("distributed")));
    let show = |m: Option<f64>| m.map_or_else(|| "not reached".to_string(), |v| format!("{v:.0} ms"));
    let reached = |label: &str| times(label).iter().filter(|t| t.is_some()).count();
    let detail = format!(
        "median time to 0.90: distributed {} ({}/30 reached), centralized {} ({}/30 reached)",
        show(d),
        reached("distributed"),
        show(c),
        reached("centralized")
    );
    let ok = match (d, c) {
        (Some(d), Some(c)) => d < c,
        (Some(_), None) => true,
        _ => false,
    };
    check(ok, detail.clone())?;
    Ok(detail)
}

fn protocol_liveness() -> Outcome {
    let ga = GaConfig { max_generations: 50, ..GaConfig::default() };
    let mut largest = 0;
    for seed in 0..100 {
        let mut cfg = SessionConfig::new(6, GaConfig { rng_seed: seed, ..ga.clone() }, roi());
        cfg.link.loss_prob = 0.1;
        cfg.link.rng_seed = seed;
        let r = run_session(cfg, &[]).map_err(|e| format!("seed {seed}: {e}"))?;
        check(r.all_delivered(6), format!("seed {seed}: final positions reached {:?}", r.fpf_delivered))?;
        let best = r.considered.values().max().copied().unwrap_or(0);
        check(decode_coverage(best) == r.reported_coverage, format!("seed {seed}: decision is not the best result"))?;
        for line in &r.log {
            let v: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
            if let Some(size) = v["size"].as_u64() {
                check(size <= 250, format!("seed {seed}: {size}-byte frame"))?;
                largest = largest.max(size);
            }
        }
    }

    let cfg = SessionConfig::new(6, ga.clone(), roi());
    let clean = run_session(cfg.clone(), &[]).map_err(|e| e.to_string())?;
    // Worker 1 holds some but not all of its segments at t=25.
    let faults = [SimEvent::reset(25, 1), SimEvent::restart(60, 1)];
    let faulty = run_session(cfg, &faults).map_err(|e| e.to_string())?;
    let before_reset = faulty
        .log
        .iter()
        .filter(|l| l.contains(r#""event":"deliver""#) && l.contains(r#""to":1,"kind":"SPF""#))
        .filter(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["t"].as_u64().unwrap() < 25)
        .count();
    let total = faulty.islands[0].population.len().div_ceil(3);
    check(before_reset > 0 && before_reset < total, format!("reset not during reassembly ({before_reset}/{total})"))?;
    check(faulty.islands[0].resets == 1, "reset not applied")?;
    check(faulty.islands[0].population == clean.islands[0].population, "sub-population differs after reset")?;
    check(faulty.all_delivered(6), "faulty session incomplete")?;
    Ok(format!(
        "100/100 sessions at 10% loss complete, largest frame {largest} bytes, reset during reassembly recovered"
    ))
}

fn random_frame(rng: &mut ChaCha8Rng) -> Frame {
    let kinds = [FrameKind::Spf, FrameKind::Rf, FrameKind::Fpf];
    let total = rng.gen_range(1..=u16::MAX);
    let seq = rng.gen_range(0..total);
    let kind = kinds[rng.gen_range(0..3)];
    let sender = rng.gen();
    if rng.gen_bool(0.25) {
        let data = Frame::data(kind, sender, seq, total, Vec::new());
        if rng.gen_bool(0.5) {
            Frame::ack_of(sender, &data)
        } else {
            Frame::nack(sender, kind, seq, total)
        }
    } else {
        let len = rng.gen_range(0..=MAX_PAYLOAD);
        Frame::data(kind, sender, seq, total, (0..len).map(|_| rng.gen()).collect())
    }
}

fn codec() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for i in 0..10_000 {
        let f = random_frame(&mut rng);
        let bytes = encode_frame(&f).map_err(|e| format!("frame {i}: {e}"))?;
        check(bytes.len() <= 250, format!("frame {i}: {} bytes", bytes.len()))?;
        check(decode_frame(&bytes).as_ref() == Ok(&f), format!("frame {i} does not round-trip"))?;
    }
    check(chromosomes_per_frame(20) == Ok(3), "capacity for n=20")?;
    let cfg = GaConfig::default();
    let three: Vec<Chromosome> = (0..3).map(|_| vdga::seeding::random_individual(&cfg, &roi(), &mut rng)).collect();
    let segs = segment_subpopulation(&three, 20, 0).map_err(|e| e.to_string())?;
    check(
        segs.len() == 1 && segs[0].payload.len() == 240,
        "3 chromosomes of 20 nodes do not fill one 240-byte payload",
    )?;
    check(chromosomes_per_frame(60) == Ok(1), "n=60 should still fit")?;
    check(
        matches!(chromosomes_per_frame(61), Err(ProtocolError::ChromosomeTooLarge { n_objects: 61, .. })),
        "n=61 accepted",
    )?;
    Ok("10000 round-trips, 3 chromosomes (240 bytes) per frame at n=20, n=61 rejected".into())
}

fn determinism() -> Outcome {
    let mut spec = baseline_spec(0.90, 120);
    spec.repetitions = 3;
    spec.link.loss_prob = 0.1;
    let a = compare_centralized_distributed(&spec).map_err(|e| e.to_string())?;
    let b = compare_centralized_distributed(&spec).map_err(|e| e.to_string())?;
    check(a.records_csv() == b.records_csv() && a.summary_csv() == b.summary_csv(), "comparison CSV differs")?;
    let (m1, m2) = (compare_mutation_variants(&spec).unwrap(), compare_mutation_variants(&spec).unwrap());
    check(
        m1.traces_csv() == m2.traces_csv() && m1.report.records_csv() == m2.report.records_csv(),
        "mutation CSV differs",
    )?;
    let (b1, b2) = (compare_baselines(&spec).unwrap(), compare_baselines(&spec).unwrap());
    check(b1.records_csv() == b2.records_csv(), "baseline CSV differs")?;
    let (_, s1) = run_distributed(&spec, 1).map_err(|e| e.to_string())?;
    let (_, s2) = run_distributed(&spec, 1).map_err(|e| e.to_string())?;
    check(s1.log_text() == s2.log_text() && s1.summary_json() == s2.summary_json(), "event log differs")?;
    Ok(format!("reports and a {}-line event log replay byte for byte", s1.log.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("geometry oracle", geometry_oracle),
        ("voronoi tiling", voronoi_tiling),
        ("micro-examples", micro_examples),
        ("ga convergence", ga_convergence),
        ("hybrid dominance", hybrid_dominance),
        ("distributed vs centralized", distributed_direction),
        ("protocol liveness and safety", protocol_liveness),
        ("codec", codec),
        ("determinism", determinism),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut out = std::io::stdout();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !only.is_empty() && !only.iter().any(|o| *o == id || name.contains(o.as_str())) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or(p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        let secs = t.elapsed().as_secs_f64();
        let line = match outcome {
            Ok(detail) => format!("criterion {id} ({name}): PASS in {secs:.1} s: {detail}"),
            Err(detail) => {
                failed += 1;
                format!("criterion {id} ({name}): FAIL in {secs:.1} s: {detail}")
            }
        };
        let _ = writeln!(out, "{line}");
    }
    let _ = writeln!(out, "{failed} criteria failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
