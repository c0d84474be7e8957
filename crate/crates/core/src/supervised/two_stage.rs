//! Two-stage hierarchy: three bag-of-words NBM classifiers (remote ports,
//! domain names, cipher suites) feed a decision-tree-ensemble stage-1
//! together with quantitative attributes.
//!
//! Stage-1 consumes, per instance: a one-hot encoding of each stage-0
//! tentative class, each stage-0 confidence, and the quantitative
//! attributes. Stage-1 can exploit systematic stage-0 mistakes: a class that
//! stage-0 consistently confuses in a characteristic way is still learnable.

use serde::{Deserialize, Serialize};

use super::forest::{forest_train, ForestConfig, ForestModel};
use super::nbm::{nbm_train, BagOfWords, NbmModel};
use crate::{Error, Result};

/// One instance's inputs to the hierarchy.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TwoStageInstance {
    pub ports: BagOfWords,
    pub domains: BagOfWords,
    pub ciphers: BagOfWords,
    pub quantitative: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageModel {
    pub classes: Vec<String>,
    pub nbm_ports: NbmModel,
    pub nbm_domains: NbmModel,
    pub nbm_ciphers: NbmModel,
    pub forest: ForestModel,
}

fn stage1_features(
    model_ports: &NbmModel,
    model_domains: &NbmModel,
    model_ciphers: &NbmModel,
    n_classes: usize,
    inst: &TwoStageInstance,
) -> Vec<f64> {
    let mut features = Vec::with_capacity(3 * n_classes + 3 + inst.quantitative.len());
    for (model, bag) in [
        (model_ports, &inst.ports),
        (model_domains, &inst.domains),
        (model_ciphers, &inst.ciphers),
    ] {
        let pred = model.predict(bag);
        let mut one_hot = vec![0.0; n_classes];
        one_hot[pred.class_idx] = 1.0;
        features.extend(one_hot);
        features.push(pred.confidence);
    }
    features.extend(inst.quantitative.iter().copied());
    features
}

/// Trains the three stage-0 models and the stage-1 forest on their outputs.
pub fn two_stage_train(
    examples: &[(String, TwoStageInstance)],
    forest_config: &ForestConfig,
) -> Result<TwoStageModel> {
    if examples.is_empty() {
        return Err(Error::invalid("two_stage_train needs instances"));
    }
    let train_nbm = |select: fn(&TwoStageInstance) -> &BagOfWords| {
        let bags: Vec<(String, BagOfWords)> = examples
            .iter()
            .map(|(c, inst)| (c.clone(), select(inst).clone()))
            .collect();
        nbm_train(&bags, None)
    };
    let nbm_ports = train_nbm(|i| &i.ports)?;
    let nbm_domains = train_nbm(|i| &i.domains)?;
    let nbm_ciphers = train_nbm(|i| &i.ciphers)?;
    TwoStageModel::from_parts(nbm_ports, nbm_domains, nbm_ciphers, examples, forest_config)
}

impl TwoStageModel {
    /// Assembles the hierarchy from pre-trained stage-0 models, checking
    /// that all three share one class set, then trains stage-1.
    pub fn from_parts(
        nbm_ports: NbmModel,
        nbm_domains: NbmModel,
        nbm_ciphers: NbmModel,
        examples: &[(String, TwoStageInstance)],
        forest_config: &ForestConfig,
    ) -> Result<TwoStageModel> {
        let classes = nbm_ports.classes.clone();
        if nbm_domains.classes != classes || nbm_ciphers.classes != classes {
            return Err(Error::invalid(format!(
                "stage-0 class sets differ: ports {:?}, domains {:?}, ciphers {:?}",
                classes, nbm_domains.classes, nbm_ciphers.classes
            )));
        }
        let features: Vec<Vec<f64>> = examples
            .iter()
            .map(|(_, inst)| {
                stage1_features(&nbm_ports, &nbm_domains, &nbm_ciphers, classes.len(), inst)
            })
            .collect();
        let labels: Vec<String> = examples.iter().map(|(c, _)| c.clone()).collect();
        let forest = forest_train(&features, &labels, forest_config)?;
        Ok(TwoStageModel {
            classes,
            nbm_ports,
            nbm_domains,
            nbm_ciphers,
            forest,
        })
    }

    /// Final class and confidence (stage-1 vote fraction).
    pub fn predict(&self, inst: &TwoStageInstance) -> (String, f64) {
        let features = stage1_features(
            &self.nbm_ports,
            &self.nbm_domains,
            &self.nbm_ciphers,
            self.classes.len(),
            inst,
        );
        let pred = self.forest.predict(&features);
        (pred.class, pred.confidence)
    }
}
