//! Cross-module integration: corpus -> bank -> file -> detection -> metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use corrfad::bank::{build_bank, BankParams, GridSpec, PoseBin, TrainingSample};
use corrfad::bank_io::{load_bank, save_bank};
use corrfad::detector::{detect, max_psr_select, Backend, FilterId, PreparedBank};
use corrfad::eval::{
    cumulative_curve, evaluate_detection, localization_peak, random_baseline, scale_sweep,
    LocalizationRule, OverlapCriterion, SweepConfig, SweepSource, TestScene,
};
use corrfad::image::Image;
use corrfad::matching::psr;
use corrfad::synth::{CorpusSpec, Split, SynthSweepSource};
use corrfad::{CorrFadError, FilterBank};

fn corpus() -> CorpusSpec {
    CorpusSpec {
        canvas: (192, 192),
        iod_range: (16.0, 32.0),
        pose_range: (-8.0, 8.0),
        placement_jitter: 0.08,
        n_train: 48,
        n_test: 12,
        seed: 0xF00D,
        ..CorpusSpec::default()
    }
}

fn train_bank(spec: &CorpusSpec) -> FilterBank<f64> {
    let grid = GridSpec {
        octaves: vec![4.25, 4.75],
        poses: vec![PoseBin::Frontal],
    };
    let samples = spec.render_split::<f64>(Split::Train).unwrap().into_iter().map(|s| {
        Ok::<_, CorrFadError>(TrainingSample {
            image: s.image,
            annotation: s.annotation,
            pose_degrees: Some(s.spec.face.pose_degrees),
        })
    });
    build_bank(samples, &grid, &BankParams::default()).unwrap()
}

fn test_scenes(spec: &CorpusSpec) -> Vec<TestScene<f64>> {
    spec.render_split::<f64>(Split::Test)
        .unwrap()
        .into_iter()
        .map(Into::into)
        .collect()
}

#[test]
fn saved_bank_detects_like_the_original() {
    let spec = corpus();
    let bank = train_bank(&spec);
    let path = tempfile::NamedTempFile::new().unwrap().into_temp_path();
    save_bank(&bank, &path).unwrap();
    let loaded: FilterBank<f64> = load_bank(&path).unwrap();

    let scenes = test_scenes(&spec);
    for backend in [Backend::FrequencyPsr, Backend::SpatialNcc] {
        for scene in &scenes {
            let a = detect(&scene.image, &bank, backend, 1).unwrap();
            let b = detect(&scene.image, &loaded, backend, 1).unwrap();
            // Serialization stores 32-bit floats; rectangles and winners
            // must survive the round trip on clean scenes.
            assert_eq!(a[0].rect, b[0].rect, "{backend:?} on {}", scene.id);
            assert_eq!(a[0].filter.index, b[0].filter.index);
        }
    }
}

#[test]
fn rank1_report_matches_cumulative_head_and_tail_dominates_max_psr() {
    let spec = corpus();
    let bank = train_bank(&spec);
    let scenes = test_scenes(&spec);
    let criterion = OverlapCriterion::default();

    let report = evaluate_detection(&scenes, &bank, Backend::FrequencyPsr, criterion).unwrap();
    let curve = cumulative_curve(&scenes, &bank, Backend::FrequencyPsr, criterion).unwrap();
    assert_eq!(report.accuracy, curve.accuracy[0]);
    assert!(curve.accuracy[bank.len() - 1] >= report.accuracy);
    assert_eq!(report.hits as f64 / report.total as f64, report.accuracy);
    assert!(report.convention.contains("top-left"));
}

#[test]
fn max_psr_selection_agrees_with_rank1_detection() {
    let spec = corpus();
    let bank = train_bank(&spec);
    let scenes = test_scenes(&spec);

    let prepared = PreparedBank::new(&bank, scenes[0].image.dims()).unwrap();
    for scene in &scenes {
        let top = prepared.detect(&scene.image, 1).unwrap();

        // Recompute per-filter scores through the public matching API and
        // select by highest peak-to-sidelobe ratio.
        let mut responses = Vec::new();
        for (i, filter) in bank.filters().iter().enumerate() {
            let surface = corrfad::freq_correlate(&scene.image, filter).unwrap();
            let meta = &bank.manifest().cells[i];
            let (bx, by) = (
                bank.manifest()
                    .cells
                    .iter()
                    .map(|c| c.template_w as usize / 2)
                    .max()
                    .unwrap(),
                bank.manifest()
                    .cells
                    .iter()
                    .map(|c| c.template_h as usize / 2)
                    .max()
                    .unwrap(),
            );
            let (w, h) = scene.image.dims();
            let region = surface.crop_rect(bx, by, w - 2 * bx, h - 2 * by).unwrap();
            let score = psr(&region).unwrap();
            responses.push((
                FilterId {
                    index: i,
                    octave: meta.octave,
                    pose: meta.pose,
                },
                score,
            ));
        }
        let winner = max_psr_select(&responses).unwrap();
        assert_eq!(responses[winner].0.index, top[0].filter.index, "{}", scene.id);
    }
}

#[test]
fn noise_images_score_below_every_true_face() {
    let spec = corpus();
    let bank = train_bank(&spec);
    let scenes = test_scenes(&spec);

    let face_scores: Vec<f64> = scenes
        .iter()
        .map(|s| detect(&s.image, &bank, Backend::FrequencyPsr, 1).unwrap()[0].score)
        .collect();

    let mut rng = ChaCha12Rng::seed_from_u64(0xB1A);
    let noise_scores: Vec<f64> = (0..8)
        .map(|_| {
            let data = (0..192 * 192).map(|_| rng.random::<f64>()).collect();
            let img = Image::from_vec(192, 192, data).unwrap();
            detect(&img, &bank, Backend::FrequencyPsr, 1).unwrap()[0].score
        })
        .collect();

    let min_face = face_scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_noise = noise_scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(
        max_noise < min_face,
        "noise peak-to-sidelobe {max_noise} reaches face range (min face {min_face})"
    );
}

#[test]
fn matching_scale_filter_wins_rank_one() {
    // Two cells: one trained at the test face's scale (16 px), one far off
    // (45 px). The matching-scale filter must deliver the rank-1 detection
    // and overlap the truth at the 25% criterion.
    let make = |iod: f64, n: usize, seed: u64| CorpusSpec {
        canvas: (256, 256),
        iod_range: (iod, iod),
        pose_range: (-5.0, 5.0),
        placement_jitter: 0.06,
        n_train: n,
        n_test: 4,
        seed,
        ..CorpusSpec::default()
    };
    let grid = GridSpec {
        octaves: vec![4.0, 45.0f64.log2()],
        poses: vec![PoseBin::Frontal],
    };
    let mut samples = Vec::new();
    for spec in [make(16.0, 12, 0xAA), make(45.0, 12, 0xBB)] {
        for s in spec.render_split::<f64>(Split::Train).unwrap() {
            samples.push(Ok::<_, CorrFadError>(TrainingSample {
                image: s.image,
                annotation: s.annotation,
                pose_degrees: None,
            }));
        }
    }
    let bank = build_bank(samples, &grid, &BankParams::default()).unwrap();
    assert_eq!(bank.len(), 2);

    let scenes = test_scenes(&make(16.0, 0, 0xCC));
    let criterion = OverlapCriterion::default();
    for backend in [Backend::FrequencyPsr, Backend::SpatialNcc] {
        for scene in &scenes {
            let top = detect(&scene.image, &bank, backend, 1).unwrap();
            assert_eq!(top[0].filter.octave, 4.0, "{backend:?} on {}", scene.id);
            assert!(
                corrfad::eval::rect_overlap(&top[0].rect, &scene.truth, criterion.mode)
                    >= criterion.threshold,
                "{backend:?} on {}: rect {:?} vs truth {:?}",
                scene.id,
                top[0].rect,
                scene.truth
            );
        }
    }
}

#[test]
fn self_match_saturates_cumulative_curve() {
    // Evaluating on the exact training frames: some filter must recover
    // every face, so the full-bank cumulative accuracy is 1.
    let spec = corpus();
    let bank = train_bank(&spec);
    let train_as_test: Vec<TestScene<f64>> = spec
        .render_split::<f64>(Split::Train)
        .unwrap()
        .into_iter()
        .map(Into::into)
        .collect();
    let curve = cumulative_curve(
        &train_as_test,
        &bank,
        Backend::SpatialNcc,
        OverlapCriterion::default(),
    )
    .unwrap();
    assert_eq!(*curve.accuracy.last().unwrap(), 1.0);
}

#[test]
fn random_baseline_is_seed_deterministic() {
    let spec = corpus();
    let bank = train_bank(&spec);
    let scenes = test_scenes(&spec);
    let criterion = OverlapCriterion::default();
    let a = random_baseline(&scenes, &bank, criterion, 99).unwrap();
    let b = random_baseline(&scenes, &bank, criterion, 99).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sweep_matched_point_equals_direct_evaluation() {
    let base = CorpusSpec {
        canvas: (128, 128),
        iod_range: (16.0, 16.0),
        pose_range: (-5.0, 5.0),
        placement_jitter: 0.05,
        n_train: 16,
        n_test: 0,
        seed: 0x57EE,
        ..CorpusSpec::default()
    };
    let grid = GridSpec::single(4.0, PoseBin::Frontal);
    let samples = base.render_split::<f64>(Split::Train).unwrap().into_iter().map(|s| {
        Ok::<_, CorrFadError>(TrainingSample {
            image: s.image,
            annotation: s.annotation,
            pose_degrees: None,
        })
    });
    let bank = build_bank(samples, &grid, &BankParams::default()).unwrap();
    let filter = &bank.filters()[0];

    let make_source = || SynthSweepSource {
        base: base.clone(),
        n_per_octave: 10,
    };
    let config = SweepConfig {
        half_range: 0.1,
        step: 0.05,
        rule: LocalizationRule::Within10PctIod,
    };
    let points = scale_sweep(filter, &mut make_source(), &config).unwrap();
    assert_eq!(points.len(), 5);

    // The matched-scale point is the same computation as scoring that test
    // set directly.
    let matched = &points[2];
    let scenes = SweepSource::<f64>::test_set(&mut make_source(), 4.0).unwrap();
    let mut hits = 0u64;
    for scene in &scenes {
        let peak = localization_peak(&scene.image, filter).unwrap();
        hits += corrfad::eval::localization_hit(
            peak,
            &scene.annotation,
            LocalizationRule::Within10PctIod,
        ) as u64;
    }
    assert_eq!(matched.hits, hits);
    assert_eq!(matched.total, scenes.len() as u64);
}

#[test]
fn empty_sweep_test_set_is_rejected() {
    let base = CorpusSpec {
        canvas: (128, 128),
        iod_range: (16.0, 16.0),
        n_train: 4,
        seed: 3,
        ..CorpusSpec::default()
    };
    let grid = GridSpec::single(4.0, PoseBin::Frontal);
    let samples = base.render_split::<f64>(Split::Train).unwrap().into_iter().map(|s| {
        Ok::<_, CorrFadError>(TrainingSample {
            image: s.image,
            annotation: s.annotation,
            pose_degrees: None,
        })
    });
    let bank = build_bank(samples, &grid, &BankParams::default()).unwrap();
    let mut source = SynthSweepSource {
        base,
        n_per_octave: 0,
    };
    let config = SweepConfig::default();
    match scale_sweep(&bank.filters()[0], &mut source, &config) {
        Err(CorrFadError::EmptyTestSet { .. }) => {}
        other => panic!("expected empty-test-set, got {other:?}"),
    }
}
