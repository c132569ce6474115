#pragma once

#include "morphlab/expr.hpp"
#include "morphlab/parse.hpp"
#include "morphlab/calculus.hpp"
#include "morphlab/evaluator.hpp"
#include "morphlab/geometry.hpp"
#include "morphlab/oracle.hpp"
#include "morphlab/morphism.hpp"
#include "morphlab/constructions.hpp"
#include "morphlab/warped.hpp"
#include "morphlab/report_json.hpp"
#include "morphlab/spec_file.hpp"
