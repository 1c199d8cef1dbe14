//! Per-message size and handler time for credential installation and charge
//! authorization.
//!
//! The time attributed to a message is the wall time of the handler (or flow
//! start) that produced it, so a response's time includes the verification
//! work done on the request it answers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use super::{HarnessError, World, WorldConfig};
use crate::crypto::CryptoSuite;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Flow {
    CredentialInstallation,
    ChargeAuthorization,
}

impl Flow {
    pub fn title(self) -> &'static str {
        match self {
            Flow::CredentialInstallation => "Credential Installation",
            Flow::ChargeAuthorization => "Charge Authorization",
        }
    }

    fn messages(self) -> [(&'static str, &'static str); 4] {
        match self {
            Flow::CredentialInstallation => [
                ("GetCredOfferReq", "EV->EMSP"),
                ("GetCredOfferRes", "EMSP->EV"),
                ("CreateContractCredentialReq", "EV->EMSP"),
                ("CreateContractCredentialRes", "EMSP->EV"),
            ],
            Flow::ChargeAuthorization => [
                ("RequestProofReq", "EV->CP"),
                ("RequestProofRes", "CP->EV"),
                ("ValidateContractProofReq", "EV->CP"),
                ("ValidateContractProofRes", "CP->EV"),
            ],
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub seed: u64,
    pub modulus_bits: u64,
    pub repetitions: usize,
    pub flows: Vec<Flow>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            modulus_bits: 2048,
            repetitions: 100,
            flows: vec![Flow::CredentialInstallation, Flow::ChargeAuthorization],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub flow: Flow,
    pub message: &'static str,
    pub direction: &'static str,
    pub n: usize,
    pub time_mean_ms: f64,
    pub time_std_ms: f64,
    pub size_mean: f64,
    pub size_min: usize,
    pub size_max: usize,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub modulus_bits: u64,
    pub repetitions: usize,
    pub setup_ms: f64,
    pub rows: Vec<MetricsRecord>,
}

impl BenchReport {
    pub fn row(&self, message: &str) -> Option<&MetricsRecord> {
        self.rows.iter().find(|r| r.message == message)
    }

    /// Sum of the mean times of a flow's messages.
    pub fn flow_total_ms(&self, flow: Flow) -> f64 {
        self.rows.iter().filter(|r| r.flow == flow).map(|r| r.time_mean_ms).sum()
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "modulus {} bits, {} repetitions", self.modulus_bits, self.repetitions);
        let _ = writeln!(
            out,
            "{:<34} {:<9} {:>10} {:>10} {:>12}",
            "Message Name", "Direction", "time [ms]", "std [ms]", "size [bytes]"
        );
        let mut current = None;
        for r in &self.rows {
            if current != Some(r.flow) {
                if let Some(f) = current {
                    let _ = writeln!(out, "  {:<32} {:<9} {:>10.3}", "total", "", self.flow_total_ms(f));
                }
                let _ = writeln!(out, "{}", r.flow.title());
                current = Some(r.flow);
            }
            let _ = writeln!(
                out,
                "  {:<32} {:<9} {:>10.3} {:>10.3} {:>12.0}",
                r.message, r.direction, r.time_mean_ms, r.time_std_ms, r.size_mean
            );
        }
        if let Some(f) = current {
            let _ = writeln!(out, "  {:<32} {:<9} {:>10.3}", "total", "", self.flow_total_ms(f));
        }
        out
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::from(
            "flow,message,direction,n,time_mean_ms,time_std_ms,size_mean_bytes,size_min_bytes,size_max_bytes\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.3},{:.3},{:.1},{},{}",
                r.flow.title(),
                r.message,
                r.direction,
                r.n,
                r.time_mean_ms,
                r.time_std_ms,
                r.size_mean,
                r.size_min,
                r.size_max
            );
        }
        out
    }
}

#[derive(Default)]
struct Samples {
    times: Vec<f64>,
    sizes: Vec<usize>,
}

fn collect<S: CryptoSuite>(w: &World<S>, since: usize, flow: Flow, acc: &mut BTreeMap<&'static str, Samples>) {
    for (name, _) in flow.messages() {
        if let Some(i) = (since..w.log.len()).find(|&i| w.log[i].msg_type == name && w.log[i].error.is_none()) {
            let s = acc.entry(name).or_default();
            s.times.push(w.costs[i]);
            s.sizes.push(w.log[i].bytes.0.len());
        }
    }
}

/// Runs `repetitions` installations and charging sessions with one EV and
/// aggregates per-message statistics.
pub fn bench<S: CryptoSuite>(suite: S, config: &BenchConfig) -> Result<BenchReport, HarnessError> {
    let start = Instant::now();
    let wc = WorldConfig { seed: config.seed, modulus_bits: config.modulus_bits, ..WorldConfig::default() };
    let mut w = World::new(suite, wc)?;
    w.onboard_emsp(0)?;
    w.publish(0)?;
    w.provision(0)?;
    w.contract(0, 0, "standard")?;
    w.install(0, 0)?;
    if let Some(f) = w.failures.first() {
        return Err(HarnessError::Setup(format!("{} failed: {}", f.actor, f.error)));
    }
    let setup_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut acc: BTreeMap<&'static str, Samples> = BTreeMap::new();
    for _ in 0..config.repetitions {
        if config.flows.contains(&Flow::CredentialInstallation) {
            let mark = w.log.len();
            w.contract(0, 0, "standard")?;
            w.install(0, 0)?;
            collect(&w, mark, Flow::CredentialInstallation, &mut acc);
        }
        if config.flows.contains(&Flow::ChargeAuthorization) {
            w.advance(60);
            let mark = w.log.len();
            w.charge(0, 0)?;
            collect(&w, mark, Flow::ChargeAuthorization, &mut acc);
        }
    }
    if let Some(f) = w.failures.first() {
        return Err(HarnessError::Setup(format!("{} failed: {}", f.actor, f.error)));
    }
    let mut flows = config.flows.clone();
    flows.sort();
    flows.dedup();
    let mut rows = Vec::new();
    for flow in flows {
        for (message, direction) in flow.messages() {
            let s = acc.remove(message).unwrap_or_default();
            let n = s.times.len();
            let mean = if n == 0 { 0.0 } else { s.times.iter().sum::<f64>() / n as f64 };
            let var =
                if n < 2 { 0.0 } else { s.times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1) as f64 };
            rows.push(MetricsRecord {
                flow,
                message,
                direction,
                n,
                time_mean_ms: mean,
                time_std_ms: var.sqrt(),
                size_mean: if n == 0 { 0.0 } else { s.sizes.iter().sum::<usize>() as f64 / n as f64 },
                size_min: s.sizes.iter().copied().min().unwrap_or(0),
                size_max: s.sizes.iter().copied().max().unwrap_or(0),
            });
        }
    }
    Ok(BenchReport { modulus_bits: config.modulus_bits, repetitions: config.repetitions, setup_ms, rows })
}
