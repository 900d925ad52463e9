#ifndef PHOTHERM_PHOTHERM_HPP
#define PHOTHERM_PHOTHERM_HPP

#include "errors.hpp"
#include "units.hpp"
#include "model.hpp"
#include "rates.hpp"
#include "equilibrium.hpp"
#include "kinetics.hpp"
#include "threshold.hpp"
#include "lindblad.hpp"
#include "io.hpp"
#include "config.hpp"
#include "cli.hpp"

#endif // PHOTHERM_PHOTHERM_HPP
