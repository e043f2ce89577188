//! Scenario output directory: curve CSVs, summaries, audits and a plot script.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use super::ScenarioOutput;
use crate::curves::write_curves_csv;
use crate::error::Result;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Write every table of `out` into `dir` (created if missing). Returns the
/// file names written, in order.
pub fn write_outputs(out: &ScenarioOutput, dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let mut curve_files = Vec::new();
    for set in &out.curve_sets {
        let name = format!("{}.csv", set.file_stem());
        let mut w = create(dir, &name)?;
        write_curves_csv(&mut w, &set.curves)?;
        w.flush()?;
        curve_files.push(name);
    }

    let mut w = create(dir, "config.txt")?;
    w.write_all(out.config.to_text().as_bytes())?;
    w.flush()?;
    written.push("config.txt".to_string());

    let mut w = create(dir, "summary.csv")?;
    writeln!(w, "scenario,target,source,n,label,kind,g,trials,min,median,max,mean")?;
    for r in &out.summary {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            out.config.kind.as_str(),
            r.target,
            r.source,
            r.n,
            r.label,
            r.kind,
            r.g,
            r.trials,
            r.spread.min,
            r.spread.median,
            r.spread.max,
            r.spread.mean
        )?;
    }
    w.flush()?;
    written.push("summary.csv".to_string());

    let mut w = create(dir, "samples.csv")?;
    writeln!(w, "dataset,role,n,mode,trial,users,unique,successes")?;
    for r in &out.samples {
        let succ = r.successes.map(|s| s.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.dataset,
            r.role,
            r.n,
            r.mode.as_str(),
            r.trial,
            r.users,
            r.unique,
            succ
        )?;
    }
    w.flush()?;
    written.push("samples.csv".to_string());

    if !out.ranking.is_empty() {
        let mut w = create(dir, "ranking.csv")?;
        writeln!(w, "target,n,trial,g,best_source,value")?;
        for r in &out.ranking {
            writeln!(w, "{},{},{},{},{},{}", r.target, r.n, r.trial, r.g, r.best, r.value)?;
        }
        w.flush()?;
        written.push("ranking.csv".to_string());

        let mut w = create(dir, "crossovers.csv")?;
        writeln!(w, "target,n,trial,g,from,to")?;
        for r in &out.crossovers {
            writeln!(w, "{},{},{},{},{},{}", r.target, r.n, r.trial, r.g, r.from, r.to)?;
        }
        w.flush()?;
        written.push("crossovers.csv".to_string());
    }

    if !out.plateaus.is_empty() {
        let mut w = create(dir, "plateaus.csv")?;
        writeln!(w, "curve,trial,what,start_g,end_g,value")?;
        for r in &out.plateaus {
            writeln!(w, "{},{},{},{},{},{}", r.curve, r.trial, r.what, r.start_g, r.end_g, r.value)?;
        }
        w.flush()?;
        written.push("plateaus.csv".to_string());
    }

    if !out.audits.is_empty() {
        let mut w = create(dir, "audits.csv")?;
        writeln!(w, "dataset,role,n,trial,sample_users,remainder_users,source_users,conserved")?;
        for r in &out.audits {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.dataset, r.role, r.n, r.trial, r.sample_users, r.remainder_users, r.source_users, r.conserved
            )?;
        }
        w.flush()?;
        written.push("audits.csv".to_string());
    }

    let mut w = create(dir, "plot.py")?;
    w.write_all(plot_script(&curve_files).as_bytes())?;
    w.flush()?;
    written.push("plot.py".to_string());

    written.extend(curve_files);
    Ok(written)
}

fn plot_script(curve_files: &[String]) -> String {
    let mut s = String::from(
        "#!/usr/bin/env python3\n\
         # Plots every curve CSV in this directory to <name>.png (needs matplotlib).\n\
         import csv\n\
         import os\n\
         import matplotlib\n\
         matplotlib.use(\"Agg\")\n\
         import matplotlib.pyplot as plt\n\
         \n\
         HERE = os.path.dirname(os.path.abspath(__file__))\n\
         FILES = [\n",
    );
    for f in curve_files {
        s += &format!("    {f:?},\n");
    }
    s += "]\n\
\n\
for name in FILES:\n\
    series = {}\n\
    with open(os.path.join(HERE, name)) as fh:\n\
        for row in csv.DictReader(fh):\n\
            key = (row[\"kind\"], int(row[\"trial\"]))\n\
            series.setdefault(key, ([], []))\n\
            series[key][0].append(int(row[\"g\"]))\n\
            series[key][1].append(float(row[\"value\"]))\n\
    fig, ax = plt.subplots()\n\
    unit = \"users\"\n\
    for (kind, trial), (g, v) in sorted(series.items()):\n\
        ax.plot(g, v, label=f\"{kind} trial {trial}\", linewidth=1)\n\
    ax.set_xscale(\"log\")\n\
    ax.set_xlabel(\"guesses\")\n\
    ax.set_title(name)\n\
    if len(series) <= 12:\n\
        ax.legend(fontsize=\"small\")\n\
    fig.savefig(os.path.join(HERE, name[:-4] + \".png\"), dpi=120)\n\
    plt.close(fig)\n";
    s
}
