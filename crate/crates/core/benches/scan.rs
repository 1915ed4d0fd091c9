use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use isingpp_core::drive::{DriveProtocol, ProbePulse};
use isingpp_core::lattice::SpinChainConfig;
use isingpp_core::parallel::Execution;
use isingpp_core::response::{pump_probe_scan, ResponseExtractionParams, ScanSetup};
use isingpp_core::vacuum::{prepare_vacuum_aligned, VacuumKind};

fn scan(c: &mut Criterion) {
    let mut group = c.benchmark_group("pump_probe_scan");
    group
        .sample_size(10)
        .measurement_time(Duration::from_secs(20));
    let protocol = DriveProtocol::default_ramp(0.4);
    let pulse = ProbePulse::broadband(0.0);
    let params = ResponseExtractionParams::default();
    let tps: Vec<f64> = (0..8).map(|i| 15.0 + 5.0 * i as f64).collect();
    for n in [6, 8] {
        let config = SpinChainConfig::periodic(n, 0.25).unwrap();
        let psi0 = prepare_vacuum_aligned(&config, 0.0, VacuumKind::TrueVacuum, 0.4).unwrap();
        for (name, execution) in [
            ("parallel", Execution::Parallel),
            ("sequential", Execution::Sequential),
        ] {
            let setup = ScanSetup {
                execution,
                ..ScanSetup::default()
            };
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| {
                    pump_probe_scan(&psi0, &config, &protocol, &pulse, &tps, &params, &setup)
                        .unwrap()
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, scan);
criterion_main!(benches);
