#pragma once

#include "mvk/errors.hpp"
#include "mvk/lattice.hpp"
#include "mvk/rates.hpp"
#include "mvk/operators.hpp"
#include "mvk/model.hpp"
#include "mvk/spectrum.hpp"
#include "mvk/polynomials.hpp"
#include "mvk/rahman.hpp"
#include "mvk/simulator.hpp"
#include "mvk/io.hpp"
