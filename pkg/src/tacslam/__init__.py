'''
tacslam/
├── __init__.py              Initializer
├── __main__.py              Entry point
├── _version.py              Versioning
├── config.py                User configuration store
├── errors.py                Shared exception base
├── main.py                  Main module
├── utils.py                 Utilities
├── scripts/                 CLI tools (e.g., autocomplete.sh)
├── geometry/                SE(3) algebra, planar rigid fits
├── surface/                 normal/height/curvature maps, contact masks
├── sim/                     synthetic objects, renderer, calibration, trajectories
├── tracking/                NormalFlow registration, keyframe tracker
├── loop/                    coverage set, two-stage loop detection
├── graph/                   pose graph, LM and GNC solvers
├── recon/                   fast fusion, re-meshing, mesh metrics
└── pipeline/                formats, configuration, streaming SLAM, evaluation
'''
