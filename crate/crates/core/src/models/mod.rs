//! The seven forecasting architectures, built from the primitive layers.

pub mod checkpoint;
pub mod network;
pub mod spec;

pub use checkpoint::{
    from_checkpoint_str, load_checkpoint, save_checkpoint, to_checkpoint_string, to_tagged_checkpoint_string,
};
pub use network::{build, ForwardPass, LayerGraph, Model, ModelCache, OutputGrads, Stage};
pub use spec::{ModelKind, ModelSpec};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::Mode;
    use crate::rng::SeededRng;
    use crate::tensor::Tensor;

    fn input(batch: usize, spec: &ModelSpec, seed: u64) -> Tensor<f64> {
        let mut rng = SeededRng::new(seed, 99);
        Tensor::from_fn(&[batch, spec.lookback, spec.features], |_| rng.normal())
    }

    #[test]
    fn dense_param_count_by_hand() {
        let spec = ModelSpec::new(ModelKind::Dnn, 4, 1).with_hidden(vec![8]);
        let model: Model<f64> = build(&spec, &mut SeededRng::new(0, 0)).unwrap();
        assert_eq!(model.param_count(), 4 * 8 + 8 + 8 + 1);
    }

    #[test]
    fn lstm_param_count_by_hand() {
        let spec = ModelSpec::new(ModelKind::RnnLstm, 5, 3).with_hidden(vec![4]);
        let model: Model<f64> = build(&spec, &mut SeededRng::new(0, 0)).unwrap();
        // cell 4*(3*4 + 4*4 + 4) plus head 4 + 1
        assert_eq!(model.param_count(), 128 + 5);
    }

    #[test]
    fn construction_is_deterministic() {
        for kind in ModelKind::ALL {
            let spec = ModelSpec::new(kind, 6, 3);
            let a: Model<f64> = build(&spec, &mut SeededRng::new(12, 0)).unwrap();
            let b: Model<f64> = build(&spec, &mut SeededRng::new(12, 0)).unwrap();
            assert_eq!(a.params, b.params, "{kind}");
        }
    }

    #[test]
    fn time_distributed_weights_are_shared() {
        let spec = ModelSpec::new(ModelKind::TdMlp, 10, 3).with_hidden(vec![5]);
        let model: Model<f64> = build(&spec, &mut SeededRng::new(0, 0)).unwrap();
        assert_eq!(model.params.value("td1.weight").unwrap().shape(), &[3, 5]);
        assert_eq!(model.param_count(), 3 * 5 + 5 + 10 * 5 + 1);
    }

    #[test]
    fn eval_forward_is_repeatable() {
        for kind in ModelKind::ALL {
            let spec = ModelSpec::new(kind, 6, 3).with_dropout(0.5);
            let model: Model<f64> = build(&spec, &mut SeededRng::new(3, 0)).unwrap();
            let x = input(4, &spec, 1);
            let a = model.forward(&x, Mode::Eval, &mut SeededRng::new(1, 0)).unwrap();
            let b = model.forward(&x, Mode::Eval, &mut SeededRng::new(2, 0)).unwrap();
            assert_eq!(a.prediction, b.prediction);
            assert_eq!(a.prediction.shape(), &[4, 1]);
            assert_eq!(a.reconstruction.is_some(), kind == ModelKind::Autoencoder);
        }
    }

    #[test]
    fn zero_dnn_outputs_zero() {
        let spec = ModelSpec::new(ModelKind::Dnn, 4, 2);
        let mut model: Model<f64> = build(&spec, &mut SeededRng::new(0, 0)).unwrap();
        let n = model.params.scalar_count();
        model.params.set_flat_values(&vec![0.0; n]).unwrap();
        let pass = model
            .forward(&input(3, &spec, 5), Mode::Eval, &mut SeededRng::new(0, 0))
            .unwrap();
        assert!(pass.prediction.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn autoencoder_reconstruction_shape() {
        let spec = ModelSpec::new(ModelKind::Autoencoder, 4, 3);
        let model: Model<f64> = build(&spec, &mut SeededRng::new(0, 0)).unwrap();
        let pass = model
            .forward(&input(2, &spec, 0), Mode::Eval, &mut SeededRng::new(0, 0))
            .unwrap();
        assert_eq!(pass.reconstruction.unwrap().shape(), &[2, 12]);
    }

    #[test]
    fn wrong_input_shape_rejected() {
        let spec = ModelSpec::new(ModelKind::Cnn, 8, 3);
        let model: Model<f64> = build(&spec, &mut SeededRng::new(0, 0)).unwrap();
        let x = Tensor::zeros(&[2, 8, 4]);
        assert!(model.forward(&x, Mode::Eval, &mut SeededRng::new(0, 0)).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients_and_cache_is_single_use() {
        for kind in ModelKind::ALL {
            let spec = ModelSpec::new(kind, 5, 3);
            let mut model: Model<f64> = build(&spec, &mut SeededRng::new(0, 0)).unwrap();
            let mut pass = model
                .forward(&input(2, &spec, 4), Mode::Train, &mut SeededRng::new(0, 0))
                .unwrap();
            let grads = OutputGrads {
                prediction: Tensor::zeros(&[2, 1]),
                reconstruction: None,
            };
            model.backward(&mut pass.cache, &grads).unwrap();
            assert!(model.params.flat_grads().iter().all(|&g| g == 0.0), "{kind}");
            assert!(pass.cache.is_consumed());
            assert!(matches!(
                model.backward(&mut pass.cache, &grads),
                Err(crate::error::Error::Cache(_))
            ));
        }
    }

    #[test]
    fn cache_from_another_model_rejected() {
        let spec = ModelSpec::new(ModelKind::Dnn, 4, 2);
        let a: Model<f64> = build(&spec, &mut SeededRng::new(0, 0)).unwrap();
        let mut b: Model<f64> = build(&spec, &mut SeededRng::new(0, 0)).unwrap();
        let mut pass = a
            .forward(&input(2, &spec, 0), Mode::Eval, &mut SeededRng::new(0, 0))
            .unwrap();
        let grads = OutputGrads {
            prediction: Tensor::zeros(&[2, 1]),
            reconstruction: None,
        };
        assert!(b.backward(&mut pass.cache, &grads).is_err());
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        for kind in ModelKind::ALL {
            let spec = ModelSpec::new(kind, 6, 3);
            let model: Model<f64> = build(&spec, &mut SeededRng::new(77, 0)).unwrap();
            let text = to_checkpoint_string(&model).unwrap();
            let back: Model<f64> = from_checkpoint_str(&text).unwrap();
            assert_eq!(back.spec, model.spec);
            let bits = |m: &Model<f64>| m.params.flat_values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&back), bits(&model));
        }
    }

    #[test]
    fn checkpoint_tags_are_ignored_on_load() {
        let model: Model<f64> = build(&ModelSpec::new(ModelKind::Dnn, 4, 2), &mut SeededRng::new(3, 0)).unwrap();
        let text = to_tagged_checkpoint_string(&model, &["fingerprint=abc"]).unwrap();
        assert!(text.lines().any(|l| l == "tag fingerprint=abc"));
        let back: Model<f64> = from_checkpoint_str(&text).unwrap();
        assert_eq!(back.params.flat_values(), model.params.flat_values());
        assert!(to_tagged_checkpoint_string(&model, &["a\nb"]).is_err());
    }

    #[test]
    fn f32_models_run() {
        let spec = ModelSpec::new(ModelKind::CnnLstm, 6, 2);
        let model: Model<f32> = build(&spec, &mut SeededRng::new(0, 0)).unwrap();
        let x = input(2, &spec, 0).cast::<f32>();
        let pass = model.forward(&x, Mode::Eval, &mut SeededRng::new(0, 0)).unwrap();
        assert_eq!(pass.prediction.shape(), &[2, 1]);
    }
}
