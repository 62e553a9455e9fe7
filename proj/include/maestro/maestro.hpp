#pragma once

#include "maestro/backend.hpp"
#include "maestro/common.hpp"
#include "maestro/config.hpp"
#include "maestro/engine.hpp"
#include "maestro/env.hpp"
#include "maestro/graph.hpp"
#include "maestro/http_backend.hpp"
#include "maestro/mutate.hpp"
#include "maestro/policy.hpp"
#include "maestro/reward.hpp"
#include "maestro/spec.hpp"
#include "maestro/train.hpp"
