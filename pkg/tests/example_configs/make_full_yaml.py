"""Write a YAML file with every setting of each experiment at its default."""
import yaml

from setid.experiments import (
    CoverageConfig,
    ExperimentRun,
    HJConfig,
    ProjectionConfig,
    TimingConfig,
    UniformityConfig,
)

for config in (CoverageConfig, UniformityConfig, ProjectionConfig, TimingConfig, HJConfig):
    run = ExperimentRun(run_id=config().experiment, experiment=config())
    with open(f"full_{run.run_id}.yaml", "w") as f:
        yaml.safe_dump(run.model_dump(mode="json"), f, sort_keys=False)
