# Copyright 2026 The melwave Authors
# License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

"""CMake-backed extension build: compiles the C++ core and the pybind11
module, then drops _core into the package."""

import shutil
import subprocess
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        source_dir = Path(__file__).resolve().parent
        build_dir = Path(self.build_temp).resolve() / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)
        subprocess.run(
            [
                "cmake",
                "-S", str(source_dir),
                "-B", str(build_dir),
                "-DCMAKE_BUILD_TYPE=Release",
                "-DMELWAVE_BUILD_TESTS=OFF",
                "-DMELWAVE_BUILD_PYTHON=ON",
            ],
            check=True,
        )
        subprocess.run(
            ["cmake", "--build", str(build_dir), "--target", "_core"],
            check=True,
        )
        built = next((build_dir / "python" / "melwave").glob("_core*.so"))
        target = Path(self.get_ext_fullpath(ext.name)).resolve()
        target.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(built, target)


setup(
    ext_modules=[CMakeExtension("melwave._core")],
    cmdclass={"build_ext": CMakeBuild},
)
