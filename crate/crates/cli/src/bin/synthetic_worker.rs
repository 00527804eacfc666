//! Evaluation worker answering requests with the synthetic metric model.
//! Useful for exercising the external evaluator end to end.

use std::io;

use cellsearch_core::evaluators::external::serve;
use cellsearch_core::evaluators::synthetic_metrics;
use cellsearch_core::objectives::ObjectiveConfig;

fn main() -> io::Result<()> {
    let stdin = io::stdin().lock();
    let stdout = io::stdout().lock();
    serve(stdin, stdout, |req| {
        let cfg = ObjectiveConfig {
            num_classes: req.num_classes,
            total_epochs: req.epochs,
            ..ObjectiveConfig::default()
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(synthetic_metrics(&req.genome, &cfg))
    })
}
