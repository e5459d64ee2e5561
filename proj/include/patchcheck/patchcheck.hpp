#pragma once

#include "patchcheck/atom.hpp"
#include "patchcheck/canonical.hpp"
#include "patchcheck/dataset.hpp"
#include "patchcheck/embedding.hpp"
#include "patchcheck/equivalence.hpp"
#include "patchcheck/error.hpp"
#include "patchcheck/invariant.hpp"
#include "patchcheck/logistic.hpp"
#include "patchcheck/metrics.hpp"
#include "patchcheck/pipeline.hpp"
#include "patchcheck/semantic.hpp"
#include "patchcheck/test_selection.hpp"
