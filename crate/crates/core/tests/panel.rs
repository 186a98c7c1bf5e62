use std::collections::BTreeMap;

use fiscrisk_core::panel::{build_spells, Panel, PanelRow, SpellConfig, SpellSet, YearWindow};
use proptest::prelude::*;

fn row(country: &str, year: i32, crisis: bool) -> PanelRow {
    PanelRow {
        country: country.into(),
        year,
        crisis,
        growth: Some(1.0),
        interest: Some(2.0),
        rqe: Some(0.5),
        rle: Some(0.5),
    }
}

/// Per country: observed years (with gaps) and crisis flags.
fn arb_panel() -> impl Strategy<Value = Vec<(String, Vec<(i32, bool)>)>> {
    prop::collection::vec(
        prop::collection::vec((any::<bool>(), prop::bool::weighted(0.25)), 5..30),
        1..5,
    )
    .prop_map(|countries| {
        countries
            .into_iter()
            .enumerate()
            .map(|(i, obs)| {
                let mut year = 1995;
                let mut rows = Vec::new();
                for (skip, crisis) in obs {
                    // occasional unobserved year
                    year += if skip && year % 7 == 0 { 2 } else { 1 };
                    rows.push((year, crisis));
                }
                (format!("C{i}"), rows)
            })
            .collect()
    })
}

fn build(panel: &[(String, Vec<(i32, bool)>)], cfg: &SpellConfig) -> SpellSet {
    let rows = panel
        .iter()
        .flat_map(|(c, obs)| obs.iter().map(move |&(y, k)| row(c, y, k)))
        .collect();
    build_spells(&Panel::from_rows(rows).unwrap(), cfg).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn spells_partition_non_crisis_years(panel in arb_panel(), gap in 0u32..3) {
        let cfg = SpellConfig { window: YearWindow::new(1998, 2021).unwrap(), reentry_gap: gap, covariate_lag: 0 };
        let spells = build(&panel, &cfg);
        let status: BTreeMap<(String, i32), bool> = panel
            .iter()
            .flat_map(|(c, obs)| obs.iter().map(move |&(y, k)| ((c.clone(), y), k)))
            .collect();

        let mut covered: BTreeMap<(String, i32), usize> = BTreeMap::new();
        for s in &spells.spells {
            prop_assert!(s.duration >= 1);
            prop_assert_eq!(s.exit - s.entry, s.duration);
            prop_assert!(cfg.window.contains(s.entry) && cfg.window.contains(s.exit));
            for y in s.entry..s.exit {
                // at risk only in observed, crisis-free years
                prop_assert_eq!(status.get(&(s.subject.clone(), y)), Some(&false));
                *covered.entry((s.subject.clone(), y)).or_default() += 1;
            }
            if s.event {
                prop_assert_eq!(status.get(&(s.subject.clone(), s.exit)), Some(&true));
            }
        }
        prop_assert!(covered.values().all(|&n| n == 1), "overlapping spells");

        // each crisis onset ends at most one spell
        for (c, obs) in &panel {
            let onsets = obs.iter().enumerate().filter(|(i, (y, k))| {
                *k && cfg.window.contains(*y) && (*i == 0 || !obs[i - 1].1 || obs[i - 1].0 + 1 != *y)
            }).count();
            let events = spells.spells.iter().filter(|s| &s.subject == c && s.event).count();
            prop_assert!(events <= onsets);
        }
    }

    #[test]
    fn spell_csv_round_trips(panel in arb_panel()) {
        let spells = build(&panel, &SpellConfig::default());
        let mut buf = Vec::new();
        spells.write_csv(&mut buf).unwrap();
        let back = SpellSet::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), spells.len());
        prop_assert_eq!(back.n_events(), spells.n_events());
        for (a, b) in back.spells.iter().zip(&spells.spells) {
            prop_assert_eq!((&a.subject, a.entry, a.exit, a.event), (&b.subject, b.entry, b.exit, b.event));
        }
    }
}
