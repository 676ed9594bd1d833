use ibgan::dataio::{
    generate_synthetic, inject_imbalance, parse_long_csv, split, standardize, write_long_csv, Dataset, Sample,
    SyntheticSpec,
};
use ibgan::ndcore::Array;
use ibgan::rng::seeded;
use ibgan::Error;
use proptest::prelude::*;

fn arb_dataset() -> impl Strategy<Value = Dataset> {
    (1usize..4, 1usize..6, 0usize..3, 1usize..4, 1usize..8).prop_flat_map(|(channels, length, meta, classes, n)| {
        let sample = (
            prop::collection::vec(-1e6f64..1e6, channels * length),
            prop::collection::vec(-10.0f64..10.0, meta),
            0..classes,
        );
        prop::collection::vec(sample, n).prop_map(move |rows| {
            let samples = rows
                .into_iter()
                .map(|(data, metadata, label)| Sample {
                    series: Array::new(vec![channels, length], data).unwrap(),
                    metadata,
                    label,
                })
                .collect();
            Dataset::new(samples, (0..classes).map(|y| format!("class{y}")).collect()).unwrap()
        })
    })
}

/// Relabels classes in order of first appearance, as the parser numbers them.
fn canonical(ds: &Dataset) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<String>) {
    let mut names: Vec<String> = Vec::new();
    let mut labels = Vec::new();
    for s in &ds.samples {
        let name = &ds.class_names[s.label];
        if !names.contains(name) {
            names.push(name.clone());
        }
        labels.push(name.clone());
    }
    (
        ds.samples.iter().map(|s| s.series.data().to_vec()).collect(),
        ds.samples.iter().map(|s| s.metadata.clone()).collect(),
        labels,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn long_csv_round_trips(ds in arb_dataset()) {
        let back = parse_long_csv(&write_long_csv(&ds)).unwrap();
        prop_assert_eq!((back.channels, back.length, back.meta_dim), (ds.channels, ds.length, ds.meta_dim));
        prop_assert_eq!(canonical(&back), canonical(&ds));
    }

    #[test]
    fn parser_never_panics(text in "\\PC{0,200}") {
        let _ = parse_long_csv(&text);
    }

    #[test]
    fn standardized_channels_have_zero_mean(seed in any::<u64>()) {
        let ds = generate_synthetic(&SyntheticSpec::two_class_ar(2, 6, [15, 5]), &mut seeded(seed)).unwrap();
        let (z, _) = standardize(&ds).unwrap();
        for c in 0..2 {
            let vals: Vec<f64> = z.samples.iter().flat_map(|s| s.series.row(c).to_vec()).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            prop_assert!(mean.abs() < 1e-9);
        }
    }
}

#[test]
fn parse_errors_carry_line_numbers() {
    let text = "sample_id,channel,t,value,label\na,0,0,1.0,x\na,0,1,oops,x\n";
    match parse_long_csv(text) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn split_is_stratified_and_imbalance_only_drops() {
    let ds = generate_synthetic(&SyntheticSpec::two_class_ar(1, 4, [100, 100]), &mut seeded(1)).unwrap();
    let (train, test) = split(&ds, 0.3, &mut seeded(2)).unwrap();
    assert_eq!(train.len() + test.len(), 200);
    assert_eq!(test.class_counts(), vec![30, 30]);
    let imb = inject_imbalance(&train, 0.9, &mut seeded(3)).unwrap();
    let counts = imb.dataset.class_counts();
    assert_eq!(counts.iter().filter(|&&n| n == 70).count(), 1);
    assert_eq!(counts.iter().filter(|&&n| n == 7).count(), 1);
    for s in &imb.dataset.samples {
        assert!(train.samples.contains(s));
    }
}
