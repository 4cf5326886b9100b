"""Epidemiological parameter presets for wild-type SARS-CoV-2 in Germany (2020).

Six RKI age groups.  The weighted averages use each group's share of the total
population; they drive the non-age-resolved experiments.  The baseline contact
matrix is a reconstruction (the published source is only available as a
heatmap): a plausible structure rescaled so that the population-weighted
average number of total daily contacts is exactly 7.69129.
"""
from __future__ import annotations

import numpy as np

from .model import AgeGroupParams

AGE_GROUP_NAMES = ("A00-04", "A05-14", "A15-34", "A35-59", "A60-79", "A80+")

# German population per RKI age group, 2020.
POPULATION = (3969138.0, 7508662.0, 18921292.0, 28666166.0, 18153339.0, 5936434.0)
TOTAL_POPULATION = float(sum(POPULATION))

TRANSMISSION_RISK = (0.03, 0.06, 0.06, 0.06, 0.09, 0.175)
PROB_CARRIER_TO_INFECTED = (0.75, 0.75, 0.8, 0.8, 0.8, 0.8)
PROB_INFECTED_TO_HOSPITAL = (0.0075, 0.0075, 0.019, 0.0615, 0.165, 0.225)
PROB_HOSPITAL_TO_ICU = (0.075, 0.075, 0.075, 0.15, 0.3, 0.4)
PROB_ICU_TO_DEAD = (0.05, 0.05, 0.14, 0.14, 0.4, 0.6)

LATENT_TIME = (3.335,) * 6
CARRIER_TIME = (2.74, 2.74, 2.565, 2.565, 2.565, 2.565)
INFECTED_TIME = (7.02625, 7.02625, 7.0665, 6.9385, 6.835, 6.775)
HOSPITAL_TIME = (5.0, 5.0, 5.925, 7.55, 8.5, 11.0)
ICU_TIME = (6.95, 6.95, 6.86, 17.36, 17.1, 11.6)

ISOLATION_CARRIER = 1.0  # carriers do not isolate
ISOLATION_INFECTED = 0.3  # 70% of symptomatic individuals isolate

# Population-weighted averages for the non-age-resolved model.
AVG_TRANSMISSION_RISK = 0.07333
AVG_PROB_CARRIER_TO_INFECTED = 0.79310
AVG_PROB_INFECTED_TO_HOSPITAL = 0.07864
AVG_PROB_HOSPITAL_TO_ICU = 0.17318
AVG_PROB_ICU_TO_DEAD = 0.21718
AVG_LATENT_TIME = 3.335
AVG_CARRIER_TIME = 2.58916
AVG_INFECTED_TIME = 6.94547
AVG_HOSPITAL_TIME = 7.28196
AVG_ICU_TIME = 13.066

# Population-weighted average of the total daily contacts in the baseline matrix.
AVG_TOTAL_CONTACTS = 7.69129

# Reported daily new transmissions in Germany around mid-October 2020, used as
# the constant-dynamics starting level.
DAILY_NEW_TRANSMISSIONS_OCT_2020 = 4050.0


def age_group_params() -> tuple[AgeGroupParams, ...]:
    """The six age-resolved parameter sets."""
    return tuple(
        AgeGroupParams(
            transmission_risk=TRANSMISSION_RISK[i],
            isolation_carrier=ISOLATION_CARRIER,
            isolation_infected=ISOLATION_INFECTED,
            latent_time=LATENT_TIME[i],
            carrier_time=CARRIER_TIME[i],
            infected_time=INFECTED_TIME[i],
            hospital_time=HOSPITAL_TIME[i],
            icu_time=ICU_TIME[i],
            prob_carrier_to_infected=PROB_CARRIER_TO_INFECTED[i],
            prob_infected_to_hospital=PROB_INFECTED_TO_HOSPITAL[i],
            prob_hospital_to_icu=PROB_HOSPITAL_TO_ICU[i],
            prob_icu_to_dead=PROB_ICU_TO_DEAD[i],
            population=POPULATION[i],
        )
        for i in range(6)
    )


def averaged_params(population: float = TOTAL_POPULATION) -> AgeGroupParams:
    """Single-group parameter set from the population-weighted averages."""
    return AgeGroupParams(
        transmission_risk=AVG_TRANSMISSION_RISK,
        isolation_carrier=ISOLATION_CARRIER,
        isolation_infected=ISOLATION_INFECTED,
        latent_time=AVG_LATENT_TIME,
        carrier_time=AVG_CARRIER_TIME,
        infected_time=AVG_INFECTED_TIME,
        hospital_time=AVG_HOSPITAL_TIME,
        icu_time=AVG_ICU_TIME,
        prob_carrier_to_infected=AVG_PROB_CARRIER_TO_INFECTED,
        prob_infected_to_hospital=AVG_PROB_INFECTED_TO_HOSPITAL,
        prob_hospital_to_icu=AVG_PROB_HOSPITAL_TO_ICU,
        prob_icu_to_dead=AVG_PROB_ICU_TO_DEAD,
        population=population,
    )


# Reconstructed shape of the German baseline contact pattern: strong
# within-group mixing for school ages and working ages, few contacts for 80+.
_CONTACT_SHAPE = np.array(
    [
        [1.5, 1.0, 1.5, 2.0, 0.5, 0.1],
        [0.6, 5.0, 1.5, 2.5, 0.7, 0.1],
        [0.4, 1.0, 5.0, 3.0, 0.8, 0.2],
        [0.5, 1.5, 3.0, 4.5, 1.0, 0.3],
        [0.2, 0.5, 1.5, 2.0, 2.0, 0.4],
        [0.1, 0.2, 0.7, 1.0, 0.8, 0.6],
    ]
)


def contact_baseline() -> np.ndarray:
    """6x6 baseline contact matrix with weighted total contacts 7.69129."""
    weights = np.asarray(POPULATION) / TOTAL_POPULATION
    total = float(weights @ _CONTACT_SHAPE.sum(axis=1))
    return _CONTACT_SHAPE * (AVG_TOTAL_CONTACTS / total)
