//! Subcommand implementations. Each command writes its outputs plus a
//! `*.provenance.json` sidecar holding the tool version, the argv, the
//! master seed, and the full resolved configuration, so any file on
//! disk can be traced back to an exact, replayable invocation.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::PolarizationArg;
use triphoton::cascade::{detect, fit_rabi, rabi_intensity, simulate_rabi_sweep};
use triphoton::correlator::{
    count_events, estimate_efficiency, g2_with_kernel, g3_with_kernel, marginalize_g3, read_tags,
    write_hist1d_csv, write_hist2d_csv, write_tags, EventCounts, TagFormat,
};
use triphoton::levels::{
    build_triexciton_levels, direct_transition_table, energy_grid, indirect_transition_table,
    render_spectrum, Polarization, TransitionLine,
};
use triphoton::{BinningSpec, Error, Kernel, Result, TagStream};

pub struct CorrelateArgs {
    pub input: PathBuf,
    pub channels: Vec<u8>,
    pub window_ps: Option<i64>,
    pub bin_ps: Option<i64>,
    pub oracle: bool,
    pub format: TagFormat,
    pub out_dir: PathBuf,
    pub event_window_ps: Option<u64>,
}

/// Sidecar path for a written file: `tags.ttg` -> `tags.provenance.json`.
fn provenance_for(target: &Path) -> PathBuf {
    target.with_extension("provenance.json")
}

fn write_provenance(path: &Path, config: &RunConfig) -> Result<()> {
    let doc = serde_json::json!({
        "tool": "triphoton",
        "version": env!("CARGO_PKG_VERSION"),
        "command": std::env::args().collect::<Vec<String>>(),
        "seed": config.seed,
        "config": config,
    });
    let text = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::config(format!("provenance serialization failed: {e}")))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn simulate(
    config: &RunConfig,
    cycles: Option<u64>,
    out: &Path,
    format: TagFormat,
) -> Result<()> {
    let compiled = config.cascade.compile()?;
    let cycles = cycles.unwrap_or(config.cycles);
    let output = compiled.simulate(cycles, config.seed);
    let tags = detect(&compiled, &output, &config.detector, config.seed)?;
    write_tags(&tags, out, format)?;
    write_provenance(&provenance_for(out), config)?;

    let stats = &output.stats;
    println!("cycles:  {cycles} ({} prepared)", stats.prepared);
    println!(
        "photons: {} (indirect fraction {:.4})",
        stats.photons,
        stats.indirect_fraction()
    );
    println!(
        "tags:    {} on {} channels -> {}",
        tags.len(),
        tags.channel_count(),
        out.display()
    );
    Ok(())
}

fn print_event_summary(counts: &EventCounts, tags: &TagStream, channels: [u8; 3]) {
    println!(
        "events (window {} ps): total {}, n12 {}, n13 {}, n23 {}, n123 {}",
        counts.window_ps, counts.total_events, counts.n12, counts.n13, counts.n23, counts.n123
    );
    let multi = counts.n12 + counts.n13 + counts.n23 + counts.n123;
    if multi > 0 {
        println!("two-photon fraction: {:.6}", counts.two_photon_fraction());
    }
    if counts.n123 == 0 {
        println!("efficiency: no triple coincidences; not estimable from this stream");
        return;
    }
    match estimate_efficiency(counts) {
        Ok(est) => {
            for (i, &ch) in channels.iter().enumerate() {
                println!(
                    "efficiency channel {ch}: {:.6} +- {:.6} ({} tags)",
                    est.eta[i],
                    est.err[i],
                    tags.singles(ch)
                );
            }
        }
        Err(Error::Data { .. }) => {
            println!("efficiency: insufficient coincidence statistics to estimate");
        }
        Err(e) => println!("efficiency: not available ({e})"),
    }
}

pub fn correlate(config: &RunConfig, args: &CorrelateArgs) -> Result<()> {
    let tags = read_tags(&args.input, args.format)?;
    let half_window = args.window_ps.unwrap_or(config.binning.half_window_ps);
    let spec = BinningSpec::symmetric(
        half_window,
        args.bin_ps.unwrap_or(config.binning.bin_width_ps),
    )?;
    let spec3 = BinningSpec::symmetric(
        half_window,
        args.bin_ps.unwrap_or(config.binning.g3_bin_width_ps),
    )?;
    fs::create_dir_all(&args.out_dir)?;
    write_provenance(&args.out_dir.join("correlate.provenance.json"), config)?;

    match *args.channels.as_slice() {
        [a, b] => {
            let h = g2_with_kernel(&tags, a, b, &spec, Kernel::Streaming)?;
            if args.oracle {
                let check = g2_with_kernel(&tags, a, b, &spec, Kernel::Naive)?;
                if check.raw_counts != h.raw_counts {
                    return Err(Error::data(
                        "kernel oracle",
                        "streaming and brute-force g2 counts disagree",
                    ));
                }
                println!("oracle check: g2 counts identical across kernels");
            }
            let path = args.out_dir.join(format!("g2_{a}_{b}.csv"));
            write_hist1d_csv(&h, &mut create(&path)?)?;
            let pairs: u64 = h.raw_counts.iter().sum();
            println!(
                "g2({a},{b}): {pairs} pairs in {} bins of {} ps -> {}",
                spec.bin_count(),
                spec.bin_width_ps,
                path.display()
            );
        }
        [a, b, c] => {
            let h = g3_with_kernel(&tags, (a, b, c), &spec3, &spec3, Kernel::Streaming)?;
            if args.oracle {
                let check = g3_with_kernel(&tags, (a, b, c), &spec3, &spec3, Kernel::Naive)?;
                if check.raw_counts != h.raw_counts {
                    return Err(Error::data(
                        "kernel oracle",
                        "streaming and brute-force g3 counts disagree",
                    ));
                }
                println!("oracle check: g3 counts identical across kernels");
            }
            let stem = format!("g3_{a}_{b}_{c}");
            let path = args.out_dir.join(format!("{stem}.csv"));
            write_hist2d_csv(&h, &mut create(&path)?)?;
            let triples: u64 = h.raw_counts.iter().sum();
            println!(
                "g3({a},{b},{c}): {triples} triples on a {}x{} grid -> {}",
                h.shape().0,
                h.shape().1,
                path.display()
            );
            for (axis, name) in [
                (triphoton::MarginalAxis::Tau2, "tau2"),
                (triphoton::MarginalAxis::Tau1, "tau1"),
            ] {
                let m = marginalize_g3(&h, axis);
                let path = args.out_dir.join(format!("{stem}_marginal_{name}.csv"));
                write_hist1d_csv(&m, &mut create(&path)?)?;
                println!(
                    "marginal over {name} (channels {},{}) -> {}",
                    m.channel_pair.0,
                    m.channel_pair.1,
                    path.display()
                );
            }

            let window = args.event_window_ps.unwrap_or(config.events.window_ps);
            let counts = count_events(&tags, [a, b, c], window, config.cascade.excitation.period_ps())?;
            print_event_summary(&counts, &tags, [a, b, c]);
        }
        ref other => {
            return Err(Error::parameter(format!(
                "correlate needs 2 or 3 channels, got {}",
                other.len()
            )));
        }
    }
    Ok(())
}

fn polarization_label(p: Polarization) -> &'static str {
    match p {
        Polarization::H => "H",
        Polarization::V => "V",
        Polarization::Unpolarized => "U",
    }
}

fn write_spectrum_svg(path: &Path, grid: &[f64], curves: &[(&str, Vec<f64>)]) -> Result<()> {
    const WIDTH: f64 = 960.0;
    const HEIGHT: f64 = 480.0;
    const MARGIN: f64 = 60.0;
    let lo = grid[0];
    let hi = *grid.last().expect("grid is non-empty");
    let peak = curves
        .iter()
        .flat_map(|(_, c)| c.iter().copied())
        .fold(f64::MIN_POSITIVE, f64::max);
    let x = |e: f64| MARGIN + (e - lo) / (hi - lo) * (WIDTH - 2.0 * MARGIN);
    let y = |v: f64| HEIGHT - MARGIN - v / peak * (HEIGHT - 2.0 * MARGIN);
    let colors = ["#1f6fb4", "#c23b3b", "#3a9c55"];

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"13\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"#333\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"#333\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN
    ));
    for (i, (name, curve)) in curves.iter().enumerate() {
        let color = colors[i % colors.len()];
        let points: Vec<String> = grid
            .iter()
            .zip(curve)
            .map(|(&e, &v)| format!("{:.2},{:.2}", x(e), y(v)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\" points=\"{}\"/>\n",
            points.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{name}</text>\n",
            WIDTH - MARGIN - 60.0,
            MARGIN + 18.0 * (i + 1) as f64
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{m}\" y=\"{by}\" fill=\"#333\">{lo:.2} meV</text>\n\
         <text x=\"{rx}\" y=\"{by}\" fill=\"#333\" text-anchor=\"end\">{hi:.2} meV</text>\n\
         <text x=\"{m}\" y=\"{ty}\" fill=\"#333\">peak {peak:.3} per meV</text>\n",
        m = MARGIN,
        by = HEIGHT - MARGIN + 24.0,
        rx = WIDTH - MARGIN,
        ty = MARGIN - 12.0
    ));
    svg.push_str("</svg>\n");
    fs::write(path, svg)?;
    Ok(())
}

pub fn spectrum(
    config: &RunConfig,
    out: Option<&Path>,
    svg: Option<&Path>,
    polarization: PolarizationArg,
) -> Result<()> {
    let params = &config.cascade.fine_structure;
    let levels = build_triexciton_levels(params)?;
    let mut lines: Vec<TransitionLine> = direct_transition_table(&levels, params)?;
    lines.extend(indirect_transition_table(&levels, params)?);

    let grid = energy_grid(
        config.spectrum.lo_mev,
        config.spectrum.hi_mev,
        config.spectrum.points,
    )?;
    let broadening = config.spectrum.broadening_uev;
    let mut curves: Vec<(&str, Vec<f64>)> = Vec::new();
    if polarization != PolarizationArg::V {
        curves.push(("h", render_spectrum(&lines, Polarization::H, broadening, &grid)?));
    }
    if polarization != PolarizationArg::H {
        curves.push(("v", render_spectrum(&lines, Polarization::V, broadening, &grid)?));
    }

    // Files first: they must be complete even if stdout goes away while
    // the table below is being consumed by a pipe.
    if let Some(path) = out {
        let mut w = create(path)?;
        use std::io::Write;
        let names: Vec<&str> = curves.iter().map(|(n, _)| *n).collect();
        writeln!(w, "energy_mev,{}", names.join(","))?;
        for (k, &e) in grid.iter().enumerate() {
            let row: Vec<String> = curves.iter().map(|(_, c)| c[k].to_string()).collect();
            writeln!(w, "{e},{}", row.join(","))?;
        }
        drop(w);
        write_provenance(&provenance_for(path), config)?;
    }
    if let Some(path) = svg {
        write_spectrum_svg(path, &grid, &curves)?;
        write_provenance(&provenance_for(path), config)?;
    }

    println!("{:<12} {:>12}  {:<3} {:>9}", "line", "energy_mev", "pol", "weight");
    for line in &lines {
        println!(
            "{:<12} {:>12.6}  {:<3} {:>9.3}",
            line.line_id,
            line.photon_energy_mev,
            polarization_label(line.polarization),
            line.relative_intensity
        );
    }
    if let Some(path) = out {
        println!("spectrum ({} points) -> {}", grid.len(), path.display());
    }
    if let Some(path) = svg {
        println!("plot -> {}", path.display());
    }
    Ok(())
}

/// Parses a sweep grid written as `min:max:count`.
fn parse_powers(s: &str) -> Result<Vec<f64>> {
    let bad = |why: &str| Error::parameter(format!("power sweep {s:?}: {why}"));
    let parts: Vec<&str> = s.split(':').collect();
    let [min, max, count] = parts.as_slice() else {
        return Err(bad("expected min:max:count"));
    };
    let min: f64 = min.parse().map_err(|_| bad("minimum is not a number"))?;
    let max: f64 = max.parse().map_err(|_| bad("maximum is not a number"))?;
    let count: usize = count.parse().map_err(|_| bad("count is not an integer"))?;
    if !(min >= 0.0 && min < max) || count < 3 {
        return Err(bad("need 0 <= min < max and at least 3 points"));
    }
    Ok((0..count)
        .map(|i| min + (max - min) * i as f64 / (count - 1) as f64)
        .collect())
}

pub fn rabi(
    config: &RunConfig,
    powers: Option<&str>,
    cycles_per_point: Option<u64>,
    out: Option<&Path>,
) -> Result<()> {
    let powers = match powers {
        Some(s) => parse_powers(s)?,
        None => config.rabi_powers(),
    };
    let cycles = cycles_per_point.unwrap_or(config.rabi.cycles_per_point);
    let pi_power = config.cascade.excitation.pi_pulse_power_uw;
    let sweep = simulate_rabi_sweep(
        &powers,
        config.rabi.amplitude,
        pi_power,
        config.rabi.damping_per_sqrt_uw,
        cycles,
        config.seed,
    )?;
    let fit = fit_rabi(&sweep)?;

    // Files before chatter, so an early-closing pipe cannot truncate them.
    if let Some(path) = out {
        let mut w = create(path)?;
        use std::io::Write;
        writeln!(w, "power_uw,intensity,std_err,fit")?;
        for point in &sweep {
            let model = rabi_intensity(
                point.power_uw,
                fit.amplitude,
                fit.pi_power_uw,
                fit.damping_per_sqrt_uw,
            );
            writeln!(
                w,
                "{},{},{},{}",
                point.power_uw, point.intensity, point.std_err, model
            )?;
        }
        drop(w);
        write_provenance(&provenance_for(path), config)?;
    }

    println!(
        "points: {} ({} cycles each{})",
        sweep.len(),
        cycles,
        if cycles == 0 { ", exact model" } else { "" }
    );
    println!("fitted amplitude: {:.6} (configured {})", fit.amplitude, config.rabi.amplitude);
    println!("fitted pi power:  {:.6} uW (configured {pi_power})", fit.pi_power_uw);
    println!(
        "fitted damping:   {:.6} per sqrt(uW) (configured {})",
        fit.damping_per_sqrt_uw, config.rabi.damping_per_sqrt_uw
    );
    println!("residual rms:     {:.3e}", fit.residual_rms);
    if let Some(path) = out {
        println!("sweep -> {}", path.display());
    }
    Ok(())
}

pub fn report(config: &RunConfig, cycles: Option<u64>, out_dir: &Path) -> Result<()> {
    let compiled = config.cascade.compile()?;
    let cycles = cycles.unwrap_or(config.cycles);
    fs::create_dir_all(out_dir)?;
    write_provenance(&out_dir.join("report.provenance.json"), config)?;

    let output = compiled.simulate(cycles, config.seed);
    let stats = output.stats.clone();
    let tags = detect(&compiled, &output, &config.detector, config.seed)?;
    drop(output);

    let tags_path = out_dir.join("tags.ttg");
    write_tags(&tags, &tags_path, TagFormat::Binary)?;
    println!("cycles:   {cycles} ({} prepared)", stats.prepared);
    println!(
        "routes:   direct {} / indirect {} (indirect fraction {:.5}, configured {:.5})",
        stats.direct_route,
        stats.indirect_route,
        stats.indirect_fraction(),
        1.0 - config.cascade.branch_direct
    );
    println!("photons:  {}", stats.photons);
    for (id, n) in stats.line_counts(&compiled) {
        if n > 0 {
            println!("  {id:<12} {n:>10}");
        }
    }
    println!(
        "tags:     {} on {} channels -> {}",
        tags.len(),
        tags.channel_count(),
        tags_path.display()
    );

    let spec = BinningSpec::symmetric(config.binning.half_window_ps, config.binning.bin_width_ps)?;
    let mut channels: Vec<u8> = config.detector.iter().map(|d| d.channel).collect();
    channels.sort_unstable();
    channels.dedup();

    for i in 0..channels.len() {
        for j in (i + 1)..channels.len() {
            let (a, b) = (channels[i], channels[j]);
            match g2_with_kernel(&tags, a, b, &spec, Kernel::Streaming) {
                Ok(h) => {
                    let path = out_dir.join(format!("g2_{a}_{b}.csv"));
                    write_hist1d_csv(&h, &mut create(&path)?)?;
                    let pairs: u64 = h.raw_counts.iter().sum();
                    println!("g2({a},{b}): {pairs} pairs -> {}", path.display());
                }
                Err(Error::Normalization(why)) => {
                    println!("g2({a},{b}): skipped ({why})");
                }
                Err(e) => return Err(e),
            }
        }
    }

    if channels.len() >= 3 {
        let (a, b, c) = (channels[0], channels[1], channels[2]);
        let spec3 =
            BinningSpec::symmetric(config.binning.half_window_ps, config.binning.g3_bin_width_ps)?;
        match g3_with_kernel(&tags, (a, b, c), &spec3, &spec3, Kernel::Streaming) {
            Ok(h) => {
                let stem = format!("g3_{a}_{b}_{c}");
                let path = out_dir.join(format!("{stem}.csv"));
                write_hist2d_csv(&h, &mut create(&path)?)?;
                let triples: u64 = h.raw_counts.iter().sum();
                println!("g3({a},{b},{c}): {triples} triples -> {}", path.display());
                for (axis, name) in [
                    (triphoton::MarginalAxis::Tau2, "tau2"),
                    (triphoton::MarginalAxis::Tau1, "tau1"),
                ] {
                    let m = marginalize_g3(&h, axis);
                    let path = out_dir.join(format!("{stem}_marginal_{name}.csv"));
                    write_hist1d_csv(&m, &mut create(&path)?)?;
                }
            }
            Err(Error::Normalization(why)) => {
                println!("g3({a},{b},{c}): skipped ({why})");
            }
            Err(e) => return Err(e),
        }
        let counts = count_events(
            &tags,
            [a, b, c],
            config.events.window_ps,
            config.cascade.excitation.period_ps(),
        )?;
        print_event_summary(&counts, &tags, [a, b, c]);
    }

    println!("report -> {}", out_dir.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_sweep_parser_builds_inclusive_grids() {
        let powers = parse_powers("0:40:5").unwrap();
        assert_eq!(powers, vec![0.0, 10.0, 20.0, 30.0, 40.0]);
    }

    #[test]
    fn power_sweep_parser_rejects_malformed_input() {
        for bad in ["", "1:2", "a:2:3", "1:b:3", "1:2:x", "5:1:3", "0:10:2", "-1:10:4"] {
            assert!(parse_powers(bad).is_err(), "{bad:?} should be rejected");
        }
    }

    #[test]
    fn provenance_sidecar_replaces_the_extension() {
        assert_eq!(
            provenance_for(Path::new("out/tags.ttg")),
            Path::new("out/tags.provenance.json")
        );
        assert_eq!(
            provenance_for(Path::new("sweep.csv")),
            Path::new("sweep.provenance.json")
        );
    }
}
