#pragma once

#include "multivector.hpp"
#include "jet.hpp"
#include "versor.hpp"
#include "primitive.hpp"
#include "chain.hpp"
#include "cooperative.hpp"
#include "control.hpp"
#include "ocp.hpp"
#include "io.hpp"
#include "sim.hpp"
#include "teleop.hpp"
