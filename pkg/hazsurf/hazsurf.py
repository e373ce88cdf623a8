# hazsurf.py
# to run python -m hazsurf.hazsurf <input.csv>

import logging
import sys
import time
from typing import Dict, List, Mapping, Optional

import pandas as pd

from .core.config import RunConfig, get_development_config
from .core.entities import BinnedData, IndividualRecord
from .engine import HazardEngine
from .models import CifSet, FittedModel, SurfaceGrid


class HazSurf:
    """
    Orchestrator for smoothing hazards over two time scales.

    Uses HazardEngine for all implementation details, keeping a short and
    readable surface for library use: prepare, fit, surface, predict, cif.
    """

    def __init__(self, config: Optional[RunConfig] = None):
        self.config = config or get_development_config()
        self.engine = HazardEngine(self.config)
        self.logger = logging.getLogger(f"{__name__}.{self.__class__.__name__}")

    def prepare(self, records: Optional[List[IndividualRecord]] = None) -> BinnedData:
        """Bin records, or the configured input file when none are given"""
        if records is None:
            records = self.engine.load_records()
        return self.engine.prepare(records)

    def fit(self, data=None) -> FittedModel:
        """
        Fit the hazard model with the configured smoothing selection.

        Args:
            data: BinnedData, a list of records, or None for the configured input

        Returns:
            FittedModel at the selected smoothing parameters
        """
        if data is None:
            binned = self.engine.load_binned_or_prepare()
        elif isinstance(data, BinnedData):
            binned = data
        else:
            binned = self.engine.prepare(data)
        return self.engine.fit(binned)

    def surface(self, model: FittedModel) -> SurfaceGrid:
        return self.engine.surfaces(model)

    def predict(self, model: FittedModel, newdata: pd.DataFrame) -> pd.DataFrame:
        return self.engine.predict(model, newdata)

    def cif(self, models: Mapping[str, FittedModel],
            cause_records: Optional[Dict[str, List[IndividualRecord]]] = None) -> CifSet:
        return self.engine.cif(models, cause_records, seed=self.config.seed)

    def render(self, grid_file: str, path: Optional[str] = None):
        """Render a long-format grid file to an SVG heatmap; returns the SVG path"""
        return self.engine.render(grid_file, path)

    def run(self) -> FittedModel:
        """Prepare, fit and write the model with its surfaces to the output directory"""
        start = time.time()
        model = self.fit()
        surface = self.surface(model)
        self.engine.write_fit(model, surface)
        self.logger.info(f"Run finished in {time.time() - start:.1f}s")
        return model


def main():
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    config = get_development_config()
    if len(sys.argv) > 1:
        config.input_path = sys.argv[1]
    model = HazSurf(config).run()
    print(f"log10 rho = ({model.log10_rho_u:.4g}, {model.log10_rho_s:.4g}), AIC {model.aic:.7g}")


if __name__ == "__main__":
    main()
