use aerobridge::env::QuadEnv;
use aerobridge::eval::ConditionRow;
use aerobridge::eval::Group;
use aerobridge::grounding::{route, Paraphrase, ParaphraseBundle, EMBED_DIM};
use aerobridge::nets::gaussian::{deterministic_action, log_prob};
use aerobridge::nets::{Agent, AgentArch};
use aerobridge::ppo::{compute_gae, PpoConfig};
use aerobridge::sim::{
    map_action, rotation_matrix, step, ControlInput, DelayBuffer, MismatchConfig, PhysicalParams,
    QuadState, CONDITION_NAMES,
};
use aerobridge::task::{
    Curriculum, Outcome, Task, CRASH_PENALTY, CURRICULUM_MAX, OBS_DIM, SUCCESS_BONUS,
};
use aerobridge::tta::{latent_update, LatentState};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn euler() -> impl Strategy<Value = Vector3<f64>> {
    (-3.0..3.0f64, -1.5..1.5f64, -3.14..3.14f64).prop_map(|(r, p, y)| Vector3::new(r, p, y))
}

fn command() -> impl Strategy<Value = ControlInput> {
    prop::array::uniform4(-1.0..1.0f64).prop_map(ControlInput::new)
}

fn state() -> impl Strategy<Value = QuadState> {
    (
        prop::array::uniform3(-10.0..10.0f64),
        prop::array::uniform3(-5.0..5.0f64),
        euler(),
        prop::array::uniform3(-3.0..3.0f64),
    )
        .prop_map(|(p, v, e, w)| QuadState {
            p: Vector3::from(p),
            v: Vector3::from(v),
            euler: e,
            omega: Vector3::from(w),
        })
}

fn unit(v: Vec<f32>) -> Vec<f32> {
    let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn embedding() -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(-1.0..1.0f32, EMBED_DIM)
        .prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
        .prop_map(unit)
}

fn bundle(vecs: Vec<Vec<f32>>) -> ParaphraseBundle {
    let mut tasks: [Vec<Paraphrase>; 5] = Default::default();
    for (i, v) in vecs.into_iter().enumerate() {
        tasks[i % 5].push(Paraphrase {
            text: format!("p{i}"),
            vec: v,
        });
    }
    ParaphraseBundle {
        version: 1,
        encoder: "test".into(),
        dim: EMBED_DIM,
        tasks,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rotation_is_orthonormal(e in euler()) {
        let r = rotation_matrix(&e);
        let err = (r.transpose() * r - Matrix3::identity()).abs().max();
        prop_assert!(err < 1e-12, "{err}");
        prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn step_is_pure(s in state(), u in command(), cond in 0usize..13) {
        let params = PhysicalParams::default();
        let m = aerobridge::sim::mismatch_condition(CONDITION_NAMES[cond]).unwrap();
        let a = step(&s, u, &params, &m);
        let b = step(&s, u, &params, &m);
        prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn free_fall_energy_drift_is_bounded(s in state()) {
        let params = PhysicalParams::default();
        let m = MismatchConfig { drag_scale: 0.0, ..MismatchConfig::nominal() };
        let cut = ControlInput::new([-1.0, 0.0, 0.0, 0.0]);
        let energy = |s: &QuadState| 0.5 * params.mass * s.v.norm_squared() + params.mass * params.gravity * s.p.z;
        let next = step(&s, cut, &params, &m).unwrap();
        let bound = params.mass * params.gravity.powi(2) * params.dt.powi(2);
        prop_assert!((energy(&next) - energy(&s)).abs() <= bound * (1.0 + 1e-9));
    }

    #[test]
    fn delay_releases_command_from_k_steps_ago(k in 0usize..6, cmds in prop::collection::vec(command(), 1..40)) {
        let params = PhysicalParams::default();
        let mut buf = DelayBuffer::new(k, &params);
        for (t, &u) in cmds.iter().enumerate() {
            let out = buf.push(u);
            let expected = if t >= k { cmds[t - k] } else { ControlInput::hover(&params) };
            prop_assert_eq!(map_action(out, &params), map_action(expected, &params));
        }
    }

    #[test]
    fn observations_are_finite_and_rewards_bounded(seed in 0u64..1000, task in 0usize..5, acts in prop::collection::vec(command(), 1..60)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut env = QuadEnv::new(PhysicalParams::default(), MismatchConfig::nominal(), Task::ALL[task], 4.0, &mut rng);
        for u in acts {
            if env.is_done() {
                break;
            }
            let res = env.step(u);
            let obs = env.observation();
            prop_assert_eq!(obs.len(), OBS_DIM);
            prop_assert!(obs.iter().all(|x| x.is_finite()));
            let shaped = res.reward - match res.outcome {
                Outcome::Success => SUCCESS_BONUS,
                Outcome::Crash => CRASH_PENALTY,
                _ => 0.0,
            };
            let lower = 2.0 - 3.5 - 0.05 * env.state.omega.norm() - 0.04;
            prop_assert!(shaped <= 2.0 && shaped >= lower - 1e-12, "{shaped}");
        }
    }

    #[test]
    fn curriculum_is_monotone_and_capped(task in 0usize..5, srs in prop::collection::vec(0.0..=1.0f64, 1..120)) {
        let mut c = Curriculum::for_task(Task::ALL[task]);
        for sr in srs {
            let before = c.distance;
            c.update(sr);
            prop_assert!(c.distance >= before && c.distance <= CURRICULUM_MAX);
        }
    }

    #[test]
    fn route_ignores_positive_rescaling(vecs in prop::collection::vec(embedding(), 5..10), q in embedding(), scale in 1e-3..1e3f32) {
        let b = bundle(vecs);
        let scaled: Vec<f32> = q.iter().map(|x| x * scale).collect();
        let r1 = route(&q, &b).unwrap();
        let r2 = route(&scaled, &b).unwrap();
        prop_assert_eq!(r1.task, r2.task);
        prop_assert!((r1.score - r2.score).abs() < 1e-5);
    }

    #[test]
    fn extra_paraphrase_never_lowers_its_task_score(vecs in prop::collection::vec(embedding(), 5..10), extra in embedding(), q in embedding(), k in 0usize..5) {
        let mut b = bundle(vecs);
        let before = route(&q, &b).unwrap().scores[k];
        b.tasks[k].push(Paraphrase { text: "extra".into(), vec: extra });
        prop_assert!(route(&q, &b).unwrap().scores[k] >= before);
    }

    #[test]
    fn mode_maximizes_log_prob(mean in prop::array::uniform4(-0.9..0.9f32), dev in prop::array::uniform4(-0.5..0.5f32)) {
        let log_std = [-1.5f32; 4];
        let mode = deterministic_action(&mean, &log_std);
        let other: Vec<f32> = mean.iter().zip(dev).map(|(m, d)| m + d).collect();
        prop_assert!(log_prob(&mode.raw, &mean, &log_std) >= log_prob(&other, &mean, &log_std));
    }

    #[test]
    fn latent_drift_per_step_is_at_most_alpha(seed in 0u64..50, alpha in 0.0..0.5f64, s in state(), u in command()) {
        let agent: Agent<f32> = Agent::new(AgentArch::small(8, 6), &mut ChaCha8Rng::seed_from_u64(seed));
        let params = PhysicalParams::default();
        let next = step(&s, u, &params, &MismatchConfig::nominal()).unwrap();
        let tr = aerobridge::env::Transition { state: s.to_array(), action: u, next_state: next.to_array() };
        let z0 = LatentState::reset(6, alpha);
        let z1 = latent_update(&z0, &tr, &agent, params.dt);
        let again = latent_update(&z0, &tr, &agent, params.dt);
        prop_assert_eq!(&z1.z, &again.z);
        prop_assert!(z1.z.iter().zip(&z0.z).all(|(a, b)| f64::from((a - b).abs()) <= alpha * (1.0 + 1e-5)));
    }

    #[test]
    fn gae_with_lambda_one_and_no_value_is_discounted_return(rewards in prop::collection::vec(-5.0..5.0f64, 1..32), gamma in 0.5..1.0f64) {
        let n = rewards.len();
        let (adv, ret) = compute_gae(&rewards, &vec![0.0; n], &vec![false; n], 0.0, gamma, 1.0);
        let mut g = 0.0;
        for t in (0..n).rev() {
            g = rewards[t] + gamma * g;
            prop_assert!((adv[t] - g).abs() < 1e-9 && (ret[t] - g).abs() < 1e-9);
        }
    }

    #[test]
    fn lr_decays_linearly(total in 1usize..500, i in 0usize..500) {
        let cfg = PpoConfig { total_iterations: total, ..PpoConfig::smoke() };
        let i = i.min(total);
        let expected = 3e-4 * (1.0 - i as f64 / total as f64);
        prop_assert!((cfg.lr_at(i) - expected).abs() < 1e-15);
        prop_assert_eq!(cfg.lr_at(total), 0.0);
    }

    #[test]
    fn aggregate_row_is_arithmetic_mean(srs in prop::collection::vec((0usize..=30, 0.0..500.0f64, 0.0..10.0f64), 1..13)) {
        let rows: Vec<ConditionRow> = srs.iter().map(|&(s, steps, dist)| ConditionRow {
            condition: "c".into(),
            group: Group::Id,
            episodes: 30,
            successes: s,
            sr_pct: 100.0 * s as f64 / 30.0,
            mean_steps: steps,
            mean_final_dist_m: dist,
        }).collect();
        let agg = ConditionRow::aggregate("avg", &rows.iter().collect::<Vec<_>>());
        let n = rows.len() as f64;
        prop_assert_eq!(agg.sr_pct, rows.iter().map(|r| r.sr_pct).sum::<f64>() / n);
        prop_assert_eq!(agg.mean_final_dist_m, rows.iter().map(|r| r.mean_final_dist_m).sum::<f64>() / n);
        prop_assert_eq!(agg.successes, rows.iter().map(|r| r.successes).sum::<usize>());
    }
}
