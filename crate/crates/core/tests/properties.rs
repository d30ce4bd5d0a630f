use std::collections::BTreeMap;

use proptest::prelude::*;

use plaguesim::batch::{aggregate, run_batch};
use plaguesim::behavior::{spread_information, AwarenessKind, AwarenessState, InformationParams};
use plaguesim::disease::DiseaseDefinition;
use plaguesim::metrics::{estimate_r0, TransmissionTree};
use plaguesim::population::AvatarId;
use plaguesim::rng::seeded;
use plaguesim::sim::{run_with, RunOptions};
use plaguesim::sir::{integrate_sir, SirParams};
use plaguesim::transmission::{compose_exposure, Activity, ChannelKind, ContactPlan, InfectionRecord, InfectorRef};
use plaguesim::world::{build_world, WorldSpec, ZoneId, ZoneSpec};

mod common;

fn one_zone() -> plaguesim::world::WorldMap {
    build_world(&WorldSpec {
        zones: vec![ZoneSpec { name: "z".into(), density_weight: 1.0, is_city: false, adjacent: vec![], teleports: vec![] }],
    })
    .unwrap()
}

fn enumerate(ps: &[f64]) -> f64 {
    (1u32..1 << ps.len())
        .map(|mask| {
            ps.iter()
                .enumerate()
                .map(|(i, &p)| if mask & (1 << i) != 0 { p } else { 1.0 - p })
                .product::<f64>()
        })
        .sum()
}

const SCENARIOS: [&str; 4] = ["gray-plague", "corrupted-blood", "homogeneous-baseline", "smallpox"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn composed_exposure_matches_outcome_enumeration(mults in prop::collection::vec(0.0f64..=1.0, 0..7), beta in 0.0f64..=1.0) {
        let stages = mults.iter().enumerate().map(|(i, &m)| common::stage(&format!("s{i}"), 5, 5, m)).collect::<Vec<_>>();
        let stages = if stages.is_empty() { vec![common::stage("s", 5, 5, 1.0)] } else { stages };
        let def = DiseaseDefinition { stages, ..common::disease(&[(ChannelKind::Proximity, beta)]) };
        let k = mults.len();
        let mut avatars: Vec<_> = (0..k)
            .map(|j| {
                let mut a = common::infected(j as u32, 0);
                a.infection.as_mut().unwrap().stage_index = j;
                a
            })
            .collect();
        avatars.push(common::avatar(k as u32, 0));
        let pop = common::population(avatars);
        let act = Activity::idle(pop.len());
        let plan = ContactPlan::build(&one_zone(), &pop, &def, &act, 1);
        let per_contact: Vec<f64> = mults.iter().map(|m| (beta * m).clamp(0.0, 1.0)).collect();
        let composed = plan.exposure_probability(pop.avatar(AvatarId(k as u32)), &act);
        prop_assert!((composed - enumerate(&per_contact)).abs() < 1e-12);
        prop_assert!((compose_exposure(per_contact.iter().copied()) - enumerate(&per_contact)).abs() < 1e-12);
    }

    #[test]
    fn rk4_conserves_and_s_never_grows(beta in 0.05f64..2.0, gamma in 0.05f64..1.0, n in 10.0f64..1e5, frac in 0.0001f64..0.5) {
        let p = SirParams::seeded(beta, gamma, n, (n * frac).max(1.0).min(n));
        let tr = integrate_sir(&p, 0.1, 100.0).unwrap();
        for k in 0..tr.time.len() {
            prop_assert!((tr.s[k] + tr.i[k] + tr.r[k] - n).abs() < 1e-8 * n);
            prop_assert!(tr.i[k] >= -1e-9 * n);
        }
        prop_assert!(tr.s.windows(2).all(|w| w[1] <= w[0] + 1e-9 * n));
    }

    #[test]
    fn rk4_converges_at_fourth_order(beta in 0.2f64..1.0, gamma in 0.05f64..0.3) {
        let p = SirParams::seeded(beta, gamma, 1000.0, 1.0);
        let end = |dt: f64| *integrate_sir(&p, dt, 40.0).unwrap().i.last().unwrap();
        let reference = end(0.002);
        let e1 = (end(0.4) - reference).abs();
        let e2 = (end(0.2) - reference).abs();
        // Halving the step should cut the error by about 2^4.
        prop_assume!(e2 > 1e-9);
        let ratio = e1 / e2;
        prop_assert!((8.0..32.0).contains(&ratio), "error ratio {ratio}");
    }

    #[test]
    fn rumor_accuracy_never_rises_along_a_chain(
        n in 2usize..12,
        edges in prop::collection::vec((0u32..12, 0u32..12), 0..40),
        aware in prop::collection::vec(0.0f64..=1.0, 12),
        aware_mask in prop::collection::vec(any::<bool>(), 12),
        decay in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let world = one_zone();
        let mut pop = common::population((0..n as u32).map(|i| common::avatar(i, 0)).collect());
        for i in 0..n {
            if aware_mask[i] {
                pop.avatars[i].awareness = AwarenessState::rumor(aware[i], 0);
            }
        }
        let mut act = Activity::idle(n);
        act.messages = edges
            .iter()
            .filter(|(a, b)| (*a as usize) < n && (*b as usize) < n && a != b)
            .map(|&(a, b)| (AvatarId(a), AvatarId(b)))
            .collect();
        act.messages.sort_unstable();
        act.messages.dedup();
        let params = InformationParams {
            beta_by_channel: BTreeMap::from([(ChannelKind::DirectMessage, 1.0)]),
            decay,
            observation_probability: 0.0,
            observer_accuracy: 1.0,
        };
        let def = common::disease(&[]);
        let mut rng = seeded(seed);
        for t in 1..=4 {
            let before: Vec<Option<f64>> = pop.avatars.iter().map(|a| a.awareness.accuracy).collect();
            spread_information(&world, &mut pop, &def, &act, &params, None, &mut rng, t);
            for a in &pop.avatars {
                let i = a.id.index();
                if before[i].is_some() || a.awareness.kind == AwarenessKind::Unaware {
                    continue;
                }
                let acc = a.awareness.accuracy.unwrap();
                let best_source = act
                    .messages
                    .iter()
                    .filter(|(_, to)| *to == a.id)
                    .filter_map(|(from, _)| before[from.index()])
                    .fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(acc <= best_source + 1e-12, "avatar {i} got {acc} from sources of at most {best_source}");
            }
        }
    }

    #[test]
    fn offspring_agrees_across_traversals(parents in prop::collection::vec(any::<prop::sample::Index>(), 1..60), roots in 1usize..4, done in prop::collection::vec(any::<bool>(), 64)) {
        let mut records: Vec<InfectionRecord> = Vec::new();
        for i in 0..parents.len() + roots {
            let parent = (i >= roots).then(|| parents[i - roots].index(i));
            let generation = parent.map_or(0, |p| records[p].generation + 1);
            records.push(InfectionRecord {
                case_id: i,
                infectee: AvatarId(i as u32),
                infector: parent.map(|p| InfectorRef::Avatar { avatar: AvatarId(p as u32), case: p }),
                channel: parent.map(|_| ChannelKind::Proximity),
                tick: generation as u64,
                generation,
                zone: ZoneId(0),
            });
        }
        let ended: Vec<Option<u64>> = (0..records.len()).map(|i| done[i % done.len()].then_some(1)).collect();
        let tree = TransmissionTree::from_parts(records.clone(), ended.clone());

        // Depth-first walk from the roots over the child lists.
        let children = tree.children();
        let mut by_walk = vec![usize::MAX; records.len()];
        let mut stack: Vec<usize> = tree.roots().map(|r| r.case_id).collect();
        while let Some(c) = stack.pop() {
            by_walk[c] = children[c].len();
            stack.extend(&children[c]);
        }
        // Pairwise scan over infectee -> infector links.
        let by_scan: Vec<usize> = (0..records.len())
            .map(|c| records.iter().filter(|r| matches!(r.infector, Some(InfectorRef::Avatar { case, .. }) if case == c)).count())
            .collect();
        prop_assert_eq!(&by_walk, &by_scan);
        prop_assert_eq!(&tree.offspring_counts(), &by_scan);

        let est = estimate_r0(&tree, None);
        for g in &est.per_generation {
            let members: Vec<usize> = (0..records.len()).filter(|&c| records[c].generation == g.generation && ended[c].is_some()).collect();
            let total: usize = members.iter().map(|&c| by_scan[c]).sum();
            prop_assert_eq!(g.completed_cases, members.len());
            prop_assert_eq!(g.offspring, total);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn snapshots_conserve_the_population(which in 0usize..4, seed in any::<u64>()) {
        let cfg = common::small(SCENARIOS[which], 300, 60);
        let r = run_with(&cfg, seed, RunOptions::default()).unwrap();
        let n = cfg.population.count as u64;
        let mut dead = 0;
        for s in &r.snapshots {
            prop_assert_eq!(s.population(), n);
            prop_assert_eq!(s.living() + s.dead(), n);
            prop_assert_eq!(s.awareness.unaware + s.awareness.rumor_aware + s.awareness.informed, s.living());
            prop_assert!(s.dead() >= dead);
            prop_assert!(s.symptomatic() <= s.infected());
            dead = s.dead();
        }
        let last = r.snapshots.last().unwrap();
        prop_assert_eq!(last.index_cases + last.channel_infections.values().sum::<u64>(), r.tree.len() as u64);
        prop_assert_eq!(r.tree.roots().count() as u64, last.index_cases);
    }

    #[test]
    fn same_seed_same_run(which in 0usize..4, seed in any::<u64>()) {
        let cfg = common::small(SCENARIOS[which], 200, 40);
        let opts = RunOptions { record_events: true, stop_after_index_cases: false };
        prop_assert_eq!(run_with(&cfg, seed, opts).unwrap(), run_with(&cfg, seed, opts).unwrap());
    }

    #[test]
    fn batch_ignores_seed_order(seeds in prop::collection::btree_set(any::<u64>(), 2..6), rot in 0usize..6) {
        let cfg = common::small("smallpox", 150, 50);
        let seeds: Vec<u64> = seeds.into_iter().collect();
        let mut shuffled = seeds.clone();
        shuffled.reverse();
        let k = rot % shuffled.len();
        shuffled.rotate_left(k);
        let a = run_batch(&cfg, &seeds).unwrap();
        let b = run_batch(&cfg, &shuffled).unwrap();
        let by_seed = |s: &plaguesim::batch::BatchSummary| s.runs.iter().map(|r| (r.seed, r.summary.clone())).collect::<BTreeMap<_, _>>();
        prop_assert_eq!(by_seed(&a), by_seed(&b));
        prop_assert_eq!(a.epidemic_fraction, b.epidemic_fraction);
        let mean_attack = a.runs.iter().map(|r| r.summary.attack_rate).sum::<f64>() / a.runs.len() as f64;
        prop_assert!((a.aggregate.attack_rate.mean - mean_attack).abs() < 1e-12);
        prop_assert!((b.aggregate.attack_rate.mean - mean_attack).abs() < 1e-12);
        prop_assert_eq!(aggregate(&a.runs), a.aggregate.clone());
    }
}
