"""Cross-sensor fingerprint verification.

Two complementary texture descriptors (ridge-orientation co-occurrence
and Gabor magnitude histograms) are fused with regularized canonical
correlation analysis and compared under city-block distance. The
package also ships a synthetic corpus generator, a verification
protocol with standard biometric error metrics, and a CLI.
"""

from .errors import CrossFpError

__version__ = "0.1.0"

__all__ = ["CrossFpError", "__version__"]
