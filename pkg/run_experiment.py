"""
Lanza la CLI del simulador con el experimento por defecto si no se pasan argumentos.
"""

import sys

from config.settings import get_settings
from src.cli.app import app

if __name__ == "__main__":
    if len(sys.argv) == 1:
        settings = get_settings()
        print(f"Comparando estrategias con {settings.default_experiment}...")
        sys.argv += ["compare", str(settings.default_experiment)]
    app()
