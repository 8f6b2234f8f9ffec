#pragma once

#include "core.hpp"
#include "linop.hpp"
#include "phifun.hpp"
#include "krylov.hpp"
#include "schemes.hpp"
#include "tableaux.hpp"
#include "stepctl.hpp"
#include "evaluator.hpp"
#include "integrate.hpp"
#include "problems.hpp"
#include "study.hpp"
#include "config.hpp"
