"""対称鎖分解（SCD）の構成・検証・数え上げ・上下界のツールキット"""
from scdkit.errors import ScdkitError

__version__ = "0.1.0"

__all__ = ["ScdkitError", "__version__"]
