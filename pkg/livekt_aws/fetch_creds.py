# livekt_aws/fetch_creds.py
#

# This module reads AWS keys from a downloaded credentials file and
# opens the S3 bucket that evaluation results are published to.

# Import packages
import logging

logger = logging.getLogger(__name__)


class CredentialsError(ValueError):
    pass


# Function to return AWS access keys from a credentials file
def return_aws_keys(creds_path):
    """
    Method to return the AWS access key id and secret access key stored
    in a local credentials file.

    Two layouts are recognized: the user csv downloaded from the IAM
    console (header row containing 'User Name', keys in the second row)
    and the root key file ('AWSAccessKeyId=...' / 'AWSSecretKey=...').

    Parameters
    ----------
    :type creds_path: str
    :param creds_path: (filepath) path to the credentials file

    Returns
    -------
    :return: (aws_access_key_id, aws_secret_access_key) : tuple of str
    """

    with open(creds_path, 'r') as creds_in:
        first = creds_in.readline()
        second = creds_in.readline()

    if 'User Name' in first:
        fields = second.split(',')
        if len(fields) < 3:
            raise CredentialsError('credentials row in {0} has {1} '
                                   'fields'.format(creds_path, len(fields)))
        key_id, secret = fields[1], fields[2]
    elif 'AWSAccessKeyId' in first:
        key_id = first.split('=', 1)[1]
        secret = second.split('=', 1)[1]
    else:
        raise CredentialsError('credentials file {0} not recognized, check '
                               'the file is correct'.format(creds_path))

    return key_id.strip('\r\n'), secret.strip('\r\n')


def return_bucket(creds_path, bucket_name):
    """
    Method to return a boto3 Bucket for bucket_name, authenticated with
    the keys in creds_path or, when creds_path is empty, with the
    session's default credential chain (environment, profile, role)

    Parameters
    ----------
    :type creds_path: str
    :param creds_path: (filepath) credentials file, or None
    :type bucket_name: str
    :param bucket_name: name of the S3 bucket

    Returns
    -------
    :return: bucket : boto3 Bucket instance
    """

    import boto3
    from botocore import exceptions as botocore_exceptions

    if creds_path:
        try:
            key_id, secret = return_aws_keys(creds_path)
        except (OSError, CredentialsError):
            logger.error('There was a problem extracting the AWS '
                         'credentials from %s', creds_path)
            raise
        logger.info('Connecting to S3 bucket %s with credentials from %s',
                    bucket_name, creds_path)
        session = boto3.session.Session(aws_access_key_id=key_id,
                                        aws_secret_access_key=secret)
    else:
        logger.info('Connecting to S3 bucket %s', bucket_name)
        session = boto3.session.Session()
    s3_resource = session.resource('s3', use_ssl=True)

    # Publishing needs write access, so no anonymous fallback here
    try:
        s3_resource.meta.client.head_bucket(Bucket=bucket_name)
    except botocore_exceptions.ClientError as exc:
        code = exc.response.get('Error', {}).get('Code')
        if str(code) == '404':
            logger.error('Bucket %s does not exist; check spelling and try '
                         'again', bucket_name)
        else:
            logger.error('Unable to access bucket %s: %s', bucket_name, exc)
        raise

    return s3_resource.Bucket(bucket_name)
