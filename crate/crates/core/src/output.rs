//! Run output files: `summary.txt`, `snapshots.csv`, `tree.ndjson`, `events.ndjson`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::events::write_ndjson;
use crate::metrics::{estimate_r0, r0_by_zone, TickSnapshot, TransmissionTree, TreeLine};
use crate::sim::RunResult;
use crate::transmission::ChannelKind;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

/// One row per tick: totals, awareness, epicenter, cumulative infections per
/// channel, then infected / present / restricted for every zone.
pub fn write_snapshots_csv<W: Write>(w: W, snapshots: &[TickSnapshot]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let Some(first) = snapshots.first() else {
        return out.flush().map_err(Into::into);
    };
    let mut header: Vec<String> = [
        "tick", "variant", "susceptible", "infected", "recovered", "dead", "immune", "symptomatic", "unaware", "rumor_aware",
        "informed", "epicenter", "index_cases",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(ChannelKind::ALL.iter().map(|c| format!("infections_{c}")));
    for z in &first.zones {
        header.extend(["infected", "present", "restricted"].iter().map(|k| format!("{}.{k}", z.name)));
    }
    out.write_record(&header)?;
    for s in snapshots {
        let mut row = vec![
            s.tick.to_string(),
            s.variant.clone(),
            s.susceptible().to_string(),
            s.infected().to_string(),
            s.recovered().to_string(),
            s.dead().to_string(),
            s.immune().to_string(),
            s.symptomatic().to_string(),
            s.awareness.unaware.to_string(),
            s.awareness.rumor_aware.to_string(),
            s.awareness.informed.to_string(),
            s.epicenter.clone().unwrap_or_default(),
            s.index_cases.to_string(),
        ];
        row.extend(ChannelKind::ALL.iter().map(|c| s.channel_infections.get(c).copied().unwrap_or(0).to_string()));
        for z in &s.zones {
            row.extend([z.infected.to_string(), z.present.to_string(), z.restricted.to_string()]);
        }
        out.write_record(&row)?;
    }
    out.flush().map_err(Into::into)
}

pub fn write_tree_ndjson<W: Write>(mut w: W, tree: &TransmissionTree) -> std::io::Result<()> {
    for line in tree.lines() {
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_tree_ndjson(path: &Path) -> Result<TransmissionTree> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut lines = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let l: TreeLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            column: e.column(),
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        lines.push(l);
    }
    Ok(TransmissionTree::from_lines(lines))
}

/// Human-readable report: the run summary, R0 by generation and zone.
pub fn summary_text(result: &RunResult) -> String {
    let mut s = format!("scenario            {}\nseed                {}\n{}\n", result.scenario, result.seed, result.summary);
    let r0 = estimate_r0(&result.tree, None);
    s.push_str("\nR0 by generation (completed cases)\n");
    for g in &r0.per_generation {
        let mean = g.mean.map_or_else(|| "undefined".into(), |m| format!("{m:.4}"));
        s.push_str(&format!("  gen {:<3} cases {:<6} offspring {:<6} mean {mean}\n", g.generation, g.completed_cases, g.offspring));
    }
    let zones = r0_by_zone(&result.tree, &result.snapshots);
    s.push_str("\nR0 by zone of infection\n");
    for (z, v) in &zones.by_zone {
        s.push_str(&format!("  {z:<20} {v:.4}\n"));
    }
    let d = zones.dispersion.map_or_else(|| "undefined".into(), |d| format!("{d:.4}"));
    s.push_str(&format!("  density-adjusted dispersion (CV) {d}\n"));
    s
}

/// Writes all output files into `dir`, creating it. `events.ndjson` only when
/// the result carries an event log.
pub fn write_run(dir: &Path, result: &RunResult) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let p = dir.join("summary.txt");
    std::fs::write(&p, summary_text(result)).map_err(io_err(&p))?;

    let p = dir.join("snapshots.csv");
    let f = BufWriter::new(File::create(&p).map_err(io_err(&p))?);
    write_snapshots_csv(f, &result.snapshots).map_err(|e| Error::Io { path: p.display().to_string(), source: e.into() })?;

    let p = dir.join("tree.ndjson");
    let mut f = BufWriter::new(File::create(&p).map_err(io_err(&p))?);
    write_tree_ndjson(&mut f, &result.tree).and_then(|_| f.flush()).map_err(io_err(&p))?;

    if let Some(events) = &result.events {
        let p = dir.join("events.ndjson");
        let mut f = BufWriter::new(File::create(&p).map_err(io_err(&p))?);
        write_ndjson(&mut f, events).and_then(|_| f.flush()).map_err(io_err(&p))?;
    }
    Ok(())
}
