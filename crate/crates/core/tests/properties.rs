use std::sync::Arc;

use proptest::prelude::*;
use srampuf::chipnet::protocol::{Command, ReadRequest, ResponseFrame, FRAME_LEN};
use srampuf::chipnet::{BankConfig, ChipBank};
use srampuf::metrics::MetricsRow;
use srampuf::report::{Report, ReportRow, RunMetadata};
use srampuf::simchip::Floorplan;
use srampuf::ProcessParams;

fn bank() -> Arc<ChipBank> {
    Arc::new(
        ChipBank::new(BankConfig {
            floorplan: Floorplan::default_floorplan(),
            params: ProcessParams::uncalibrated().with_noise(0.1),
            master_seed: 1,
            chips: 3,
        })
        .unwrap(),
    )
}

fn command() -> impl Strategy<Value = Vec<u8>> {
    prop_oneof![
        (0u8..5).prop_map(|c| Command::SelectChip(c).encode().unwrap()),
        Just(Command::PowerOn.encode().unwrap()),
        Just(Command::PowerOff.encode().unwrap()),
        (5u8..=255).prop_map(|op| vec![op]),
        (0usize..11, 0usize..2048)
            .prop_map(|(s, a)| Command::Read(ReadRequest::new(s, a).unwrap()).encode().unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_command_gets_one_valid_frame(cmds in prop::collection::vec(command(), 1..60)) {
        let script: Vec<u8> = cmds.concat();
        let run = || {
            let b = bank();
            let mut s = b.session();
            let mut out = Vec::new();
            s.run(script.as_slice(), &mut out).unwrap();
            out
        };
        let out = run();
        prop_assert_eq!(out.len(), cmds.len() * FRAME_LEN);
        for f in out.chunks(FRAME_LEN) {
            prop_assert!(ResponseFrame::from_bytes(f.try_into().unwrap()).is_ok());
        }
        prop_assert_eq!(out, run());
    }

    #[test]
    fn report_json_round_trips(
        rows in prop::collection::vec((0.0f64..0.5, 0.0f64..0.5, 0.0f64..1.0, 0.0f64..1.0, -1i8..=1, 2usize..300), 0..12),
        seed in any::<Option<u64>>(),
        noise in 0.0f64..1.0,
    ) {
        let rows: Vec<ReportRow> = rows
            .into_iter()
            .enumerate()
            .map(|(i, (w0, w1, m0, m1, dir, period))| ReportRow {
                metrics: MetricsRow::new(format!("D{i}"), (w0.min(w1), w0.max(w1)), (m0.min(m1), m0.max(m1))).unwrap(),
                orientation: "MX".into(),
                detected_period: period,
                template: "01".repeat(period / 2),
                pattern: format!("0({})1({})", period / 2, period - period / 2),
                direction: dir,
            })
            .collect();
        let report = Report {
            metadata: RunMetadata {
                seed,
                sigma_mismatch: Some(1.0),
                sigma_noise: Some(noise),
                beta: None,
                gradient: Some((1.0, -0.5)),
                chips: 50,
                cycles: 10,
                bits_per_reading: 1,
                baseline: "D0".into(),
                profile_source: "averaged".into(),
            },
            rows,
            notes: vec!["n".into()],
        };
        let json = report.to_json();
        let back = Report::from_json(&json).unwrap();
        prop_assert_eq!(&back, &report);
        prop_assert_eq!(back.render_table().unwrap(), report.render_table().unwrap());
    }
}
