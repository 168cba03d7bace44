use mcca::data_io::{parse_dataset, serialize_dataset, RepeatedMeasuresDataset};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn dataset() -> impl Strategy<Value = RepeatedMeasuresDataset> {
    (3usize..6, 2usize..4, 1usize..4, 1usize..3, any::<bool>())
        .prop_flat_map(|(n, l, t, p, grouped)| {
            (
                prop::collection::vec(
                    any::<f64>().prop_filter("finite", |v| v.is_finite()),
                    n * l * t * p,
                ),
                Just((n, l, t, p, grouped)),
            )
        })
        .prop_map(|(v, (n, l, t, p, grouped))| {
            let blocks = (0..l)
                .map(|f| {
                    (0..n)
                        .map(|k| {
                            DMatrix::from_column_slice(t, p, &v[(f * n + k) * t * p..][..t * p])
                        })
                        .collect()
                })
                .collect();
            let groups = grouped.then(|| (0..n).map(|k| format!("g{}", k % 2)).collect());
            RepeatedMeasuresDataset::new(
                (0..n).map(|k| format!("unit {k}")).collect(),
                groups,
                (0..l).map(|f| format!("feat{f}")).collect(),
                blocks,
            )
            .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn serialize_parse_round_trip(ds in dataset()) {
        prop_assert_eq!(parse_dataset(&serialize_dataset(&ds)).unwrap(), ds);
    }

    /// Units and features keep first-appearance order, so a shuffle can
    /// reorder them; every labelled block must still be identical.
    #[test]
    fn row_order_independence(ds in dataset(), seed in any::<u64>()) {
        let text = serialize_dataset(&ds);
        let mut lines: Vec<&str> = text.lines().collect();
        let header = lines.remove(0);
        let mut state = seed | 1;
        for i in (1..lines.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            lines.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let shuffled = format!("{header}\n{}\n", lines.join("\n"));
        let back = parse_dataset(&shuffled).unwrap();
        prop_assert_eq!(back.n_units(), ds.n_units());
        prop_assert_eq!(back.n_features(), ds.n_features());
        for (k2, unit) in back.unit_labels().iter().enumerate() {
            let k = ds.unit_labels().iter().position(|u| u == unit).unwrap();
            if let (Some(a), Some(b)) = (ds.group_labels(), back.group_labels()) {
                prop_assert_eq!(&a[k], &b[k2]);
            }
            for (l2, name) in back.feature_names().iter().enumerate() {
                let l = ds.feature_names().iter().position(|f| f == name).unwrap();
                prop_assert_eq!(back.block(l2, k2), ds.block(l, k));
            }
        }
    }
}
