use std::collections::BTreeMap;

use proptest::prelude::*;
use score_forge::config::{
    ExperimentConfig, ExperimentKind, GeometricGrid, GeometricSpec, GridSpec, MixtureSpec, ScheduleSpec, ScoreSpec,
    SeriesChecks,
};

fn grid() -> impl Strategy<Value = GridSpec> {
    prop_oneof![
        prop::collection::vec(1e-3f64..10.0, 1..6).prop_map(|mut v| {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v.dedup();
            GridSpec::List(v)
        }),
        (1e-3f64..1.0, 2usize..20).prop_map(|(from, points)| GridSpec::Geometric(GeometricGrid {
            geometric: GeometricSpec {
                from,
                to: from * 10.0,
                points
            }
        })),
    ]
}

fn n_grid() -> impl Strategy<Value = GridSpec> {
    prop::collection::btree_set(3u32..1_000_000, 1..5).prop_map(|s| GridSpec::List(s.into_iter().map(f64::from).collect()))
}

fn mixture() -> impl Strategy<Value = MixtureSpec> {
    (1usize..4).prop_flat_map(|k| {
        (prop::collection::vec(-5.0f64..5.0, k), prop::collection::vec(0.1f64..4.0, k)).prop_map(move |(m, v)| MixtureSpec {
            dim: 1,
            weights: vec![1.0 / k as f64; k],
            means: m.into_iter().map(|x| vec![x]).collect(),
            variances: v,
        })
    })
}

fn checks() -> impl Strategy<Value = BTreeMap<String, SeriesChecks>> {
    prop::option::of((-3.0f64..0.0, 0.0f64..1.0, any::<bool>())).prop_map(|o| {
        let mut m = BTreeMap::new();
        if let Some((lo, r2, dec)) = o {
            m.insert(
                "end-to-end".to_string(),
                SeriesChecks {
                    slope: Some([lo, lo + 1.0]),
                    min_r2: Some(r2),
                    decreasing: dec,
                    ..SeriesChecks::default()
                },
            );
        }
        m
    })
}

fn end_to_end_config() -> impl Strategy<Value = ExperimentConfig> {
    (
        mixture(),
        n_grid(),
        prop::option::of(grid()),
        (0.1f64..5.0, 0.1f64..5.0, 100usize..10_000, 1usize..500),
        (prop_oneof![Just(ScheduleSpec::Uniform), Just(ScheduleSpec::Geometric)], prop_oneof![Just(ScoreSpec::KernelBank), Just(ScoreSpec::Oracle), Just(ScoreSpec::None)]),
        (10_000usize..50_000, any::<u64>(), any::<bool>(), 1usize..64, checks()),
    )
        .prop_map(|(mixture, n, t, (beta, c, mc, steps), (schedule, score), (samples, seed, freeze, max_order, checks))| {
            let mut cfg = ExperimentConfig::new(ExperimentKind::EndToEnd);
            cfg.mixture = mixture;
            cfg.n_grid = Some(n);
            cfg.t_grid = t;
            cfg.beta = beta;
            cfg.bandwidth_scale = c;
            cfg.mc = mc;
            cfg.steps = steps;
            cfg.schedule = schedule;
            cfg.score = score;
            cfg.samples = samples;
            cfg.seed = seed;
            cfg.freeze_polylog = freeze;
            cfg.max_order = max_order;
            cfg.checks = checks;
            cfg.out_dir = Some(format!("out/{seed}").into());
            cfg
        })
}

proptest! {
    #[test]
    fn parse_of_emit_is_identity(cfg in end_to_end_config()) {
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
