/*
 * Copyright (C) 2026 The Splatlight Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <catch2/catch_amalgamated.hpp>

#include "gradcheck_common.hpp"

using namespace splatlight;

TEST_CASE("the gradcheck fixture honors its differentiability margins") {
    const gradcheck::GradCheckCase gc = gradcheck::build_gradcheck_case();
    REQUIRE(gc.st.scene.foreground.size() + gc.st.scene.sky.size() <= 20);
    REQUIRE(gc.view.camera.width == 16);
    REQUIRE(gc.view.camera.height == 16);

    const std::vector<std::string> bad = gradcheck::gradcheck_margins(gc);
    for (const std::string& m : bad) UNSCOPED_INFO(m);
    CHECK(bad.empty());

    // The schedule point activates every loss term, and each contributes a
    // nonzero value on this fixture.
    const LossBreakdown b = evaluate_loss(gc.st, gc.view, 0, gradcheck::kCheckIteration);
    CHECK(b.rec > 0.0);
    CHECK(b.normal > 0.0);
    CHECK(b.scale > 0.0);
    CHECK(b.fg_sky > 0.0);
    CHECK(b.sky_depth > 0.0);
    CHECK(std::isfinite(b.light));
    CHECK(b.total > 0.0);
}

TEST_CASE("analytic gradients match central differences for every group") {
    const gradcheck::GradCheckReport rep = gradcheck::run_gradient_check();
    INFO("checked " << rep.checked << " parameters; worst " << rep.worst_label
                    << " at tolerance ratio " << rep.max_rel_err);
    CHECK(rep.checked >= 280);
    for (const std::string& f : rep.failures) UNSCOPED_INFO(f);
    CHECK(rep.failed == 0);
    CHECK(rep.failures.empty());
}
