"""Learn to project sentences into a fixed visual feature space and
retrieve images, videos, or other sentences by cosine similarity there.

Submodules are imported explicitly (``textovision.textvec`` etc.); the
package root stays import-light so the CLI can configure threading
environment variables before numpy loads.
"""

__version__ = "0.1.0"
