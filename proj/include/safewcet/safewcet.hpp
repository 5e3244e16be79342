#pragma once

#include "safewcet/time.hpp"
#include "safewcet/rng.hpp"
#include "safewcet/task_model.hpp"
#include "safewcet/system_io.hpp"
#include "safewcet/test_case.hpp"
#include "safewcet/simulator.hpp"
#include "safewcet/schedulability.hpp"
#include "safewcet/fitness.hpp"
#include "safewcet/dataset.hpp"
#include "safewcet/operators.hpp"
#include "safewcet/search.hpp"
#include "safewcet/forest.hpp"
#include "safewcet/logistic.hpp"
#include "safewcet/safe_border.hpp"
#include "safewcet/generator.hpp"
#include "safewcet/evaluation.hpp"
#include "safewcet/stats.hpp"
