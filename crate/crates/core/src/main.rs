use std::fs;
use std::io::Write;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use graphite::graph::{degree_distribution, load_graph, to_document};
use graphite::layout::LayoutParams;
use graphite::netsim::{run_scenario, standard_scenario, NetworkModel};
use graphite::sampler::{degree_ks, SampleSpec, Scheme};
use graphite::server::{run_pipeline, worker_main, JobParams, Launcher, ServeConfig, Server};

#[derive(Parser)]
#[command(name = "graphite", version, about = "3D network layout, clustering and shared-session server")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a graph document and report its shape.
    Ingest { file: PathBuf },
    /// Lay out and cluster a graph, writing the annotated document.
    Layout {
        file: PathBuf,
        #[arg(long, default_value_t = 2000)]
        iters: usize,
        #[arg(long, default_value_t = 1.5)]
        cooling: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Down-sample a graph and report how well its degree distribution survived.
    Sample {
        file: PathBuf,
        #[arg(long, default_value = "rn")]
        scheme: Scheme,
        #[arg(long)]
        p: f64,
        /// Fraction of vertices a random walk must reach.
        #[arg(long, default_value_t = 0.15)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the job API and the session relay.
    Serve {
        #[arg(long, env = "GRAPHITE_HTTP_PORT", default_value_t = 8080)]
        http_port: u16,
        #[arg(long, env = "GRAPHITE_UDP_PORT", default_value_t = 9050)]
        udp_port: u16,
        #[arg(long, env = "GRAPHITE_DATA_DIR", default_value = "graphite-data")]
        data_dir: PathBuf,
        /// Only the first client's TRANSFORM messages are relayed.
        #[arg(long)]
        master_mode: bool,
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::UNSPECIFIED))]
        bind: IpAddr,
    },
    /// Simulate a shared session over a lossy network and print metrics as JSON.
    Simulate {
        #[arg(long, default_value_t = 2)]
        clients: usize,
        #[arg(long, default_value_t = 0.0)]
        loss: f64,
        /// One-way latency range in ms, `min:max`.
        #[arg(long, default_value = "5:20")]
        latency: String,
        #[arg(long, default_value_t = 0.0)]
        reorder: f64,
        #[arg(long, default_value_t = 0.0)]
        duplicate: f64,
        #[arg(long, default_value_t = 300)]
        ticks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        mtu: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    #[command(hide = true)]
    Worker {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        job: String,
    },
}

fn read(file: &Path) -> Result<Vec<u8>> {
    fs::read(file).with_context(|| format!("reading {}", file.display()))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut s = std::io::stdout().lock();
            s.write_all(bytes)?;
            s.write_all(b"\n")?;
            Ok(())
        }
    }
}

fn parse_latency(s: &str) -> Result<(u64, u64)> {
    let Some((a, b)) = s.split_once(':') else {
        bail!("latency must be min:max, got {s}");
    };
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Ingest { file } => {
            let (g, report) = load_graph(&read(&file)?)?;
            let h = degree_distribution(&g);
            let summary = serde_json::json!({
                "vertices": g.vertex_count(),
                "edges": g.edge_count(),
                "directed": g.is_directed(),
                "self_loops_dropped": report.self_loops_dropped,
                "duplicates_merged": report.duplicates_merged,
                "mean_degree": h.mean(),
                "max_degree": h.counts.keys().next_back(),
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Cmd::Layout { file, iters, cooling, seed, out } => {
            let params = JobParams {
                layout: LayoutParams {
                    max_iterations: iters,
                    cooling_exponent: cooling,
                    ..LayoutParams::with_seed(seed)
                },
                sample: None,
            };
            let doc = run_pipeline(&read(&file)?, &params)?;
            emit(out.as_deref(), &doc)?;
        }
        Cmd::Sample { file, scheme, p, fraction, seed, out } => {
            let (g, _) = load_graph(&read(&file)?)?;
            let spec = SampleSpec { scheme, p, target_fraction: fraction, rng_seed: seed };
            let s = spec.apply(&g)?;
            eprintln!(
                "{} of {} vertices, {} of {} edges, degree KS {:.4}{}",
                s.graph.vertex_count(),
                g.vertex_count(),
                s.graph.edge_count(),
                g.edge_count(),
                degree_ks(&g, &s.graph)?,
                if s.is_partial() { " (walk hit its step cap)" } else { "" }
            );
            emit(out.as_deref(), &to_document(&s.graph))?;
        }
        Cmd::Serve { http_port, udp_port, data_dir, master_mode, bind } => {
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env()
                        .unwrap_or_else(|_| "info".into()),
                )
                .with_writer(std::io::stderr)
                .init();
            let exe = std::env::current_exe()?;
            let mut cfg = ServeConfig::new(data_dir, Launcher::Process(exe));
            cfg.http_addr = SocketAddr::new(bind, http_port);
            cfg.udp_addr = SocketAddr::new(bind, udp_port);
            cfg.master_mode = master_mode;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let server = Server::start(cfg).await?;
                println!("http {}", server.http_addr);
                println!("udp {}", server.udp_addr);
                std::io::stdout().flush()?;
                tracing::info!(http = %server.http_addr, udp = %server.udp_addr, "serving");
                server.run_until_ctrl_c().await;
                anyhow::Ok(())
            })?;
        }
        Cmd::Simulate { clients, loss, latency, reorder, duplicate, ticks, seed, mtu, out } => {
            let (lo, hi) = parse_latency(&latency)?;
            let model = NetworkModel {
                loss_rate: loss,
                latency_min_ms: lo,
                latency_max_ms: hi,
                reorder_rate: reorder,
                duplicate_rate: duplicate,
                rng_seed: seed,
                ..NetworkModel::default()
            };
            let mut sc = standard_scenario(clients, ticks, model);
            if let Some(m) = mtu {
                sc.mtu = m;
            }
            let metrics = run_scenario(&sc)?;
            emit(out.as_deref(), metrics.to_json().as_bytes())?;
        }
        Cmd::Worker { data_dir, job } => {
            std::process::exit(worker_main(&data_dir, &job));
        }
    }
    Ok(())
}
