//! Opt-in threaded training. Per-coefficient jobs are pure and
//! independent, so chunking the coefficient range over scoped threads and
//! splicing the results back in canonical order reproduces the
//! single-threaded model bit-exactly, whatever the thread count.

use mlwave_core::model::{TemplateInfo, WaveletShapeModel};
use mlwave_core::training::{
    coefficient_samples, train, train_coefficient, transform_training_set, TrainError,
    TrainOptions, TrainingSet,
};
use mlwave_core::wavelet::{self, WaveletLayout};

use crate::error::Error;

pub fn train_parallel(
    ts: &TrainingSet,
    opts: &TrainOptions,
    threads: usize,
) -> Result<WaveletShapeModel, Error> {
    if threads <= 1 {
        return train(ts, opts).map_err(Error::from);
    }
    let (d2, d3) = (ts.identities(), ts.expressions());
    if d2 < opts.m2 || d3 < opts.m3 {
        return Err(Error::Train(TrainError::InsufficientSamples {
            d2,
            d3,
            m2: opts.m2,
            m3: opts.m3,
        }));
    }
    let template = &ts.shapes()[0];
    let layout = WaveletLayout::new(template.rows(), template.cols(), template.levels())
        .map_err(TrainError::from)?;
    let transforms = transform_training_set(ts)?;
    let n = layout.coefficient_count();

    let chunk = n.div_ceil(threads);
    let mut coefficient_models = Vec::with_capacity(n);
    let mut supports = Vec::with_capacity(n);
    std::thread::scope(|scope| -> Result<(), TrainError> {
        let mut handles = Vec::new();
        for start in (0..n).step_by(chunk.max(1)) {
            let end = (start + chunk).min(n);
            let transforms = &transforms;
            let layout = &layout;
            handles.push(scope.spawn(move || {
                let mut models = Vec::with_capacity(end - start);
                let mut supp = Vec::with_capacity(end - start);
                for k in start..end {
                    let samples = coefficient_samples(transforms, k);
                    models.push(train_coefficient(&samples, d2, d3, opts.m2, opts.m3)?);
                    supp.push(wavelet::coefficient_support(layout, k).expect("k in range"));
                }
                Ok::<_, TrainError>((models, supp))
            }));
        }
        for handle in handles {
            let (models, supp) = handle.join().expect("training thread panicked")?;
            coefficient_models.extend(models);
            supports.extend(supp);
        }
        Ok(())
    })?;

    let model = WaveletShapeModel {
        template: TemplateInfo {
            rows: template.rows(),
            cols: template.cols(),
            levels: template.levels(),
            landmark_indices: opts.landmark_indices.clone(),
        },
        m2: opts.m2,
        m3: opts.m3,
        coefficient_models,
        supports,
    };
    model.validate().map_err(TrainError::from)?;
    Ok(model)
}
