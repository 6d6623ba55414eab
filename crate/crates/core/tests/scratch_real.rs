use ch_inpaint::classifier::MlpModel;
use ch_inpaint::damage::{apply_damage, DamageKind, DamageSpec};
use ch_inpaint::experiment::stratified_subset;
use ch_inpaint::field::PhaseField;
use ch_inpaint::inpaint::{inpaint, preset_for};
use ch_inpaint::mnist::{Dataset, Split};

fn clip_input(f: &PhaseField) -> Vec<f64> {
    f.values().iter().map(|&v| v.clamp(0.0, 1.0)).collect()
}

#[test]
fn clip_mapping_baselines() {
    let model = MlpModel::load_path("/root/scratch/model.bin").unwrap().0;
    let test_set = Dataset::load_dir("../../data/mnist", Split::Test).unwrap();
    let subset = stratified_subset(&test_set, 500, 7);

    // clean accuracy under the clip mapping (paper reports 0.97 for initial images)
    let hits: usize = subset.iter().map(|&k| {
        let img = &test_set.images[k];
        (model.predict(&clip_input(&img.to_phase_field())).unwrap() == img.label as usize) as usize
    }).sum();
    println!("clean via clip: {:.3}", hits as f64 / subset.len() as f64);

    for rows in [6usize, 12, 16, 18, 24, 26] {
        let hits: usize = subset.iter().map(|&k| {
            let img = &test_set.images[k];
            let spec = DamageSpec::new(DamageKind::RandomRows { count: rows }).with_seed(7 + k as u64);
            let (damaged, _) = apply_damage(&img.to_phase_field(), &spec).unwrap();
            (model.predict(&clip_input(&damaged)).unwrap() == img.label as usize) as usize
        }).sum();
        println!("rows{rows}: without(clip) = {:.3}", hits as f64 / subset.len() as f64);
    }
    for frac in [0.3, 0.4, 0.8, 0.96] {
        let hits: usize = subset.iter().map(|&k| {
            let img = &test_set.images[k];
            let spec = DamageSpec::new(DamageKind::RandomPixels { fraction: frac }).with_seed(7 + k as u64);
            let (damaged, _) = apply_damage(&img.to_phase_field(), &spec).unwrap();
            (model.predict(&clip_input(&damaged)).unwrap() == img.label as usize) as usize
        }).sum();
        println!("px{}: without(clip) = {:.3}", (frac * 100.0) as u32, hits as f64 / subset.len() as f64);
    }
    println!("paper: rows 0.89/0.66/0.55/0.47/0.33/0.20  px 0.93/0.96/0.55/0.20");
}

#[test]
fn clip_mapping_with_filter_spot_checks() {
    let model = MlpModel::load_path("/root/scratch/model.bin").unwrap().0;
    let test_set = Dataset::load_dir("../../data/mnist", Split::Test).unwrap();
    let subset = stratified_subset(&test_set, 200, 7);
    for (kind, label) in [
        (DamageKind::RandomPixels { fraction: 0.3 }, "px30"),
        (DamageKind::RandomPixels { fraction: 0.96 }, "px96"),
        (DamageKind::RandomRows { count: 24 }, "rows24"),
    ] {
        let preset = preset_for(&kind);
        let (mut hits_without, mut hits_with) = (0usize, 0usize);
        for &k in &subset {
            let img = &test_set.images[k];
            let spec = DamageSpec::new(kind.clone()).with_seed(7 + k as u64);
            let (damaged, mask) = apply_damage(&img.to_phase_field(), &spec).unwrap();
            let want = img.label as usize;
            hits_without += (model.predict(&clip_input(&damaged)).unwrap() == want) as usize;
            let restored = inpaint(&damaged, &mask, &preset).unwrap();
            hits_with += (model.predict(&clip_input(&restored)).unwrap() == want) as usize;
        }
        let n = subset.len() as f64;
        println!("{label}: without {:.3} with {:.3}", hits_without as f64 / n, hits_with as f64 / n);
    }
}
