/*
 * Copyright 2026 The pcasim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Planted two-factor dataset through the whole pipeline, float and fixed.

#include <pcasim/pcasim.hpp>

#include <cstdio>

int main()
{
    using namespace pcasim;
    const Matrix<double> x = synthetic::planted_spike(400, 12, 2, 0.05, 7);

    PcaConfig cfg;
    cfg.engine.t = 4;
    cfg.engine.s = 2;
    cfg.criterion = SelectionCriterion::cvcr(0.95);

    const auto fl = run_pca(x, cfg, RealDomain{});
    const auto fx = run_pca(x, cfg, FixedDomain(QFormat{16, 16}, 16));

    std::printf("%-4s %14s %14s %10s\n", "i", "lambda(float)", "lambda(Q16.16)", "cvcr");
    for (std::size_t i = 0; i < fl.jacobi.eigenvalues.size(); ++i)
        std::printf("%-4zu %14.6f %14.6f %10.6f\n", i + 1, fl.jacobi.eigenvalues[i], fx.jacobi.eigenvalues[i],
                    fl.selection.cvcr[i]);
    std::printf("k = %zu, sweeps = %zu, rotations = %llu\n", fl.selection.k, fl.jacobi.sweeps_executed,
                static_cast<unsigned long long>(fl.jacobi.rotations_executed));
    std::printf("cycles: covariance %llu, jacobi %llu, projection %llu\n",
                static_cast<unsigned long long>(fl.perf.phases[0].total),
                static_cast<unsigned long long>(fl.perf.phases[1].total),
                static_cast<unsigned long long>(fl.perf.phases[2].total));
    return 0;
}
